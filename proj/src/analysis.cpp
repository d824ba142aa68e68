#include "dae/analysis.hpp"

#include <array>
#include <cmath>
#include <random>
#include <sstream>

namespace dae::analysis {

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::not_refuted: return "not_refuted";
        case Verdict::refuted: return "refuted";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

SampleRegion SampleRegion::scenario_default(const model::Scenario& s, int count, std::uint64_t seed) {
    SampleRegion r;
    r.lower = s.box_lower;
    r.upper = s.box_upper;
    r.count = count;
    r.seed = seed;
    return r;
}

namespace {

constexpr std::array<int, 12> kPrimes{2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

double radical_inverse(std::uint64_t i, int base) {
    double inv = 1.0 / base, f = inv, out = 0.0;
    while (i > 0) {
        out += f * static_cast<double>(i % static_cast<std::uint64_t>(base));
        i /= static_cast<std::uint64_t>(base);
        f *= inv;
    }
    return out;
}

std::string format_point(const Vec& x) {
    std::ostringstream os;
    os.precision(17);
    os << "(";
    for (Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << ")";
    return os.str();
}

struct ConstraintSample {
    Vec raw;
    Vec projected;
};

// Raw samples plus their projections onto F2 = 0 (failed projections are
// counted, not returned).
struct SampleSet {
    std::vector<Vec> raw;
    std::vector<ConstraintSample> constrained;
    int projection_failures = 0;
    std::string first_projection_failure;
};

SampleSet collect(const model::Scenario& s, const SampleRegion& region, const Tolerances& tol) {
    SampleSet out;
    out.raw = sample_region(region, s.system.domain);
    for (const Vec& x : out.raw) {
        try {
            Vec p = model::project_to_constraints(s.system, x, tol.projection_tol);
            if (!s.system.domain(p)) throw DomainError("projection left the domain", p);
            out.constrained.push_back({x, std::move(p)});
        } catch (const Error& e) {
            if (out.projection_failures++ == 0)
                out.first_projection_failure = format_point(x) + ": " + e.what();
        }
    }
    return out;
}

struct CrRanks {
    Index rank_DF2 = 0;
    Index rank_EK = 0;
};

CrRanks constraint_ranks(const model::DaeSystem& sys, const Vec& x, double rel_tol) {
    const Mat E = sys.E(x);
    const Mat DF2 = model::constraint_jacobian(sys, x);
    CrRanks out;
    if (DF2.rows() == 0) return out;
    out.rank_DF2 = num::numeric_rank(DF2, rel_tol).rank;
    const Mat K = num::kernel_basis(DF2, rel_tol);
    if (K.cols() == 0) return out;
    const auto sv = Eigen::JacobiSVD<Mat>(E).singularValues();
    const double scale = sv.size() ? sv[0] : 0.0;
    out.rank_EK = scale > 0.0 ? num::numeric_rank_scaled(Mat(E * K), rel_tol, scale).rank : 0;
    return out;
}

void fill_cr(const model::Scenario& s, const SampleSet& samples, const Tolerances& tol,
             AnalysisReport& report) {
    const model::DaeSystem& sys = s.system;
    report.rank_E = num::numeric_rank(sys.E(sys.nominal_point), tol.rank_rel_tol).rank;
    std::ostringstream detail;
    bool refuted = false;

    for (const Vec& x : samples.raw) {
        const Index r = num::numeric_rank(sys.E(x), tol.rank_rel_tol).rank;
        if (r != report.rank_E) {
            if (report.cr_failures.empty()) detail << "rank E = " << r << " (expected " << report.rank_E << ") at " << format_point(x) << "; ";
            report.rank_E_constant = false;
            report.cr_failures.push_back(x);
            refuted = true;
        }
    }

    CrRanks ref;
    bool have_ref = false;
    try {
        ref = constraint_ranks(sys, model::project_to_constraints(sys, sys.nominal_point, tol.projection_tol),
                               tol.rank_rel_tol);
        have_ref = true;
    } catch (const Error& e) {
        detail << "nominal point could not be projected: " << e.what() << "; ";
    }
    if (have_ref) {
        for (const auto& cs : samples.constrained) {
            const CrRanks r = constraint_ranks(sys, cs.projected, tol.rank_rel_tol);
            if (r.rank_DF2 != ref.rank_DF2 || r.rank_EK != ref.rank_EK) {
                if (report.cr_failures.empty())
                    detail << "rank DF2 = " << r.rank_DF2 << ", rank E ker DF2 = " << r.rank_EK
                           << " (expected " << ref.rank_DF2 << ", " << ref.rank_EK << ") at "
                           << format_point(cs.projected) << "; ";
                report.cr_failures.push_back(cs.projected);
                refuted = true;
            }
        }
    }
    if (samples.projection_failures > 0)
        detail << samples.projection_failures
               << " sample(s) could not be projected onto F2 = 0, first: " << samples.first_projection_failure
               << "; ";

    if (refuted)
        report.cr_verdict = Verdict::refuted;
    else if (!have_ref || (samples.constrained.empty() && !samples.raw.empty()))
        report.cr_verdict = Verdict::inconclusive;
    else
        report.cr_verdict = Verdict::not_refuted;
    report.cr_detail = detail.str();
    report.samples_used = static_cast<int>(samples.raw.size());
}

}  // namespace

std::vector<Vec> sample_region(const SampleRegion& region, const model::Region& domain) {
    const Index n = region.lower.size();
    if (region.upper.size() != n) throw ConfigError("sample region: bound dimensions differ");
    if (n > static_cast<Index>(kPrimes.size())) throw ConfigError("sample region: dimension too large");
    if ((region.upper.array() < region.lower.array()).any())
        throw ConfigError("sample region: upper bound below lower bound");

    std::vector<Vec> out;
    for (const Vec& p : region.include) {
        if (p.size() != n) throw ConfigError("sample region: include point has wrong dimension");
        if (domain(p)) out.push_back(p);
    }
    std::mt19937_64 rng(region.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vec shift(n);
    for (Index d = 0; d < n; ++d) shift[d] = unit(rng);

    const std::uint64_t limit = 100ull * static_cast<std::uint64_t>(std::max(region.count, 1));
    int drawn = 0;
    for (std::uint64_t i = 1; drawn < region.count && i <= limit; ++i) {
        Vec x(n);
        for (Index d = 0; d < n; ++d) {
            double u = radical_inverse(i, kPrimes[static_cast<std::size_t>(d)]) + shift[d];
            u -= std::floor(u);
            x[d] = region.lower[d] + (region.upper[d] - region.lower[d]) * u;
        }
        if (!domain(x)) continue;
        out.push_back(std::move(x));
        ++drawn;
    }
    return out;
}

AnalysisReport check_cr(const model::Scenario& s, const SampleRegion& region, const Tolerances& tol) {
    AnalysisReport report;
    report.scenario = s.name;
    report.seed = region.seed;
    fill_cr(s, collect(s, region, tol), tol, report);
    return report;
}

Index1Result index1_test(const model::Scenario& s, const Vec& x, const Tolerances& tol) {
    const model::DaeSystem& sys = s.system;
    Index1Result out;
    out.point = model::project_to_constraints(sys, x, tol.projection_tol);
    const auto comp = model::compress(sys, out.point, tol.rank_rel_tol);
    const Mat DF2 = model::constraint_jacobian(sys, out.point);
    Mat A(sys.n, sys.n);
    A << comp.leading_block(), DF2;
    const auto rank = num::numeric_rank(A, tol.rank_rel_tol);
    out.rank_A = rank.rank;
    out.det_A = A.determinant();
    const auto& sv = rank.singular_values;
    out.condition = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1] : std::numeric_limits<double>::infinity();
    out.index1 = rank.rank == sys.n;
    return out;
}

InvolutivityResult involutivity_check(const model::Scenario& s, const Vec& x, double fd_step,
                                      double tol) {
    const model::DaeSystem& sys = s.system;
    InvolutivityResult out;
    const Mat K0 = num::kernel_basis(sys.E(x));
    const Index n = sys.n;
    const Index k = K0.cols();
    out.kernel_dim = k;

    auto frame = [&](const Vec& y) -> Vec {
        const Mat K = num::kernel_basis(sys.E(y));
        if (K.cols() != k) throw InvalidInput("kernel dimension changes near the base point");
        const Mat aligned = num::align_basis(K, K0);
        return Eigen::Map<const Vec>(aligned.data(), n * k);
    };

    Mat Dframe;
    try {
        Dframe = num::fd_jacobian(frame, x, fd_step);
    } catch (const Error& e) {
        out.verdict = Verdict::inconclusive;
        out.detail = e.what();
        return out;
    }

    const Mat proj_out = Mat::Identity(n, n) - K0 * K0.transpose();
    double worst = 0.0;
    for (Index i = 0; i < k; ++i) {
        for (Index j = i + 1; j < k; ++j) {
            const Vec gi = K0.col(i), gj = K0.col(j);
            const Vec bracket = Dframe.middleRows(j * n, n) * gi - Dframe.middleRows(i * n, n) * gj;
            worst = std::max(worst, (proj_out * bracket).norm());
        }
    }
    out.residual = worst;
    out.verdict = worst <= tol ? Verdict::not_refuted : Verdict::refuted;
    return out;
}

bool on_manifold(const model::Scenario& s, const Vec& x, double tol) {
    if (x.size() != s.system.n || !s.system.domain(x)) return false;
    return model::constraint_map(s.system, x).norm() <= tol && s.manifold_branch(x);
}

AnalysisReport analyze(const model::Scenario& s, const SampleRegion& region, const Tolerances& tol) {
    AnalysisReport report;
    report.scenario = s.name;
    report.seed = region.seed;
    const SampleSet samples = collect(s, region, tol);
    fill_cr(s, samples, tol, report);

    report.min_abs_det_A = std::numeric_limits<double>::infinity();
    bool index1_ok = !samples.constrained.empty();
    for (const auto& cs : samples.constrained) {
        const Index1Result r = index1_test(s, cs.projected, tol);
        report.min_abs_det_A = std::min(report.min_abs_det_A, std::abs(r.det_A));
        report.max_condition_A = std::max(report.max_condition_A, r.condition);
        if (!r.index1) {
            index1_ok = false;
            report.index1_failures.push_back(r.point);
        }
    }
    if (samples.constrained.empty()) report.min_abs_det_A = 0.0;
    report.index1_verdict = !report.index1_failures.empty() ? Verdict::refuted
                            : index1_ok                      ? Verdict::not_refuted
                                                             : Verdict::inconclusive;

    bool inconclusive = false;
    const std::size_t probes =
        std::min(samples.raw.size(), static_cast<std::size_t>(std::max(tol.involutivity_samples, 0)));
    for (std::size_t i = 0; i < probes; ++i) {
        const InvolutivityResult r = involutivity_check(s, samples.raw[i], tol.fd_step, tol.bracket_tol);
        report.worst_bracket_residual = std::max(report.worst_bracket_residual, r.residual);
        if (r.verdict == Verdict::refuted) report.involutive_failures.push_back(samples.raw[i]);
        if (r.verdict == Verdict::inconclusive) inconclusive = true;
    }
    report.involutive_verdict = !report.involutive_failures.empty() ? Verdict::refuted
                                : (inconclusive || probes == 0)       ? Verdict::inconclusive
                                                                      : Verdict::not_refuted;
    return report;
}

}  // namespace dae::analysis
