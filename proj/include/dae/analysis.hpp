#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dae/model.hpp"

namespace dae::analysis {

using num::Index;
using num::Mat;
using num::Vec;

/// Sampling can refute a structural property but never prove it; a passing
/// check is reported as "not_refuted".
enum class Verdict { not_refuted, refuted, inconclusive };

std::string to_string(Verdict v);

/// Quasi-random sampling box. `include` points are prepended verbatim
/// (used to probe known singular loci).
struct SampleRegion {
    Vec lower, upper;
    std::vector<Vec> include;
    int count = 200;
    std::uint64_t seed = 42;

    static SampleRegion scenario_default(const model::Scenario& s, int count = 200,
                                         std::uint64_t seed = 42);
};

/// Deterministic samples: `include` first, then a randomly shifted Halton
/// sequence in the box, skipping points outside `domain`.
std::vector<Vec> sample_region(const SampleRegion& region, const model::Region& domain);

struct Tolerances {
    double rank_rel_tol = num::kDefaultRankTol;
    double projection_tol = 1e-12;
    double fd_step = 1e-5;
    double bracket_tol = 1e-6;
    int involutivity_samples = 20;
};

struct Index1Result {
    bool index1 = false;
    Index rank_A = 0;
    double det_A = 0.0;
    double condition = 0.0;
    Vec point;  // the (projected) point where A was evaluated
};

struct InvolutivityResult {
    Verdict verdict = Verdict::inconclusive;
    double residual = 0.0;  // worst distance of a bracket to the kernel span
    Index kernel_dim = 0;
    std::string detail;
};

struct AnalysisReport {
    std::string scenario;

    Index rank_E = 0;
    bool rank_E_constant = true;

    Verdict cr_verdict = Verdict::inconclusive;
    std::vector<Vec> cr_failures;
    std::string cr_detail;

    Verdict index1_verdict = Verdict::inconclusive;
    double min_abs_det_A = 0.0;
    double max_condition_A = 0.0;
    std::vector<Vec> index1_failures;

    Verdict involutive_verdict = Verdict::inconclusive;
    double worst_bracket_residual = 0.0;
    std::vector<Vec> involutive_failures;

    int samples_used = 0;
    std::uint64_t seed = 0;

    bool structural_pass() const {
        return cr_verdict == Verdict::not_refuted && index1_verdict == Verdict::not_refuted &&
               involutive_verdict == Verdict::not_refuted;
    }
};

/// Condition (CR): rank E constant on the samples; rank DF2 and rank E*ker DF2
/// constant on the samples projected to F2 = 0. Fills the CR fields only.
AnalysisReport check_cr(const model::Scenario& s, const SampleRegion& region,
                        const Tolerances& tol = {});

/// A(x) = [E1; DF2] at x projected onto F2 = 0; index one iff A is invertible.
Index1Result index1_test(const model::Scenario& s, const Vec& x, const Tolerances& tol = {});

/// Lie brackets of a continuously selected orthonormal kernel frame of E,
/// tested for membership in the frame's span.
InvolutivityResult involutivity_check(const model::Scenario& s, const Vec& x,
                                      double fd_step = 1e-5, double tol = 1e-6);

/// F2(x) small and x on the scenario's manifold branch.
bool on_manifold(const model::Scenario& s, const Vec& x, double tol = 1e-8);

/// CR over the region, index-1 on the projected samples, involutivity on a
/// subset of the raw samples.
AnalysisReport analyze(const model::Scenario& s, const SampleRegion& region,
                       const Tolerances& tol = {});

}  // namespace dae::analysis
