#include "dae/model.hpp"

#include <cmath>
#include <sstream>

namespace dae::model {

namespace {

const double kInvSqrt3 = 1.0 / std::sqrt(3.0);

Mat mat2(double a, double b, double c, double d) {
    Mat m(2, 2);
    m << a, b, c, d;
    return m;
}

Vec vec2(double a, double b) { return (Vec(2) << a, b).finished(); }
Vec vec3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }

// Root of y^3 - y = c on the branch y > 1/sqrt(3). Newton from 1.2 stays on
// the branch: g is increasing and convex there, so iterates approach the
// root monotonically from the right after at most one step.
double cubic_branch_root(double c) {
    const double g_min = kInvSqrt3 * kInvSqrt3 * kInvSqrt3 - kInvSqrt3;  // -2/(3 sqrt 3)
    if (!(c > g_min)) {
        std::ostringstream msg;
        msg << "cubic chart: y^3 - y = " << c << " has no root with y > sqrt(3)/3";
        throw ChartRangeError(msg.str(), Vec::Constant(1, c));
    }
    num::NewtonOptions opt;
    opt.tol = 2e-15 * (1.0 + std::abs(c));
    opt.max_iter = 100;
    double y;
    try {
        y = num::newton_solve([c](double v) { return v * v * v - v - c; },
                              [](double v) { return 3.0 * v * v - 1.0; }, std::max(1.2, std::cbrt(c)),
                              opt)
                .x[0];
    } catch (const NoConvergence& e) {
        y = e.last_iterate()[0];  // stalled at rounding level
    }
    if (!(y > kInvSqrt3)) throw ChartRangeError("cubic chart: Newton left the branch", Vec::Constant(1, c));
    return y;
}

Mat blockdiag_identity_zero(Index n, Index r) {
    Mat m = Mat::Zero(n, n);
    m.topLeftCorner(r, r).setIdentity();
    return m;
}

}  // namespace

Region Region::everywhere(std::string description) {
    return {[](const Vec&) { return true; }, std::move(description)};
}

Mat DaeSystem::jacobian_F(const Vec& x) const {
    if (dF) return dF(x);
    return num::fd_jacobian(F, x, num::fd_step(x));
}

const Chart& Scenario::require_chart() const {
    if (!chart) throw CapabilityError("scenario '" + name + "' has no chart");
    return *chart;
}

const InwfData& Scenario::require_inwf() const {
    if (!inwf) throw CapabilityError("scenario '" + name + "' has no normal-form data");
    return *inwf;
}

void attach_compression_reference(DaeSystem& sys) {
    sys.compression_reference = num::canonical_row_compress(sys.E(sys.nominal_point));
}

Scenario scenario_cubic() {
    Scenario s;
    s.name = "cubic";
    DaeSystem& sys = s.system;
    sys.n = 2;
    sys.E = [](const Vec& x) { return mat2(1.0, 3.0 * x[1] * x[1] - 1.0, 0.0, 0.0); };
    sys.F = [](const Vec& x) { return vec2(-x[1], x[0]); };
    sys.dF = [](const Vec&) { return mat2(0.0, -1.0, 1.0, 0.0); };
    sys.dE = [](const Vec& x) {
        return std::vector<Mat>{Mat::Zero(2, 2), mat2(0.0, 6.0 * x[1], 0.0, 0.0)};
    };
    sys.domain = Region::everywhere("R^2");
    sys.nominal_point = vec2(0.0, 1.0);
    attach_compression_reference(sys);

    const Region branch{[](const Vec& x) { return x[1] > kInvSqrt3 + kDomainMargin; },
                        "x2 > sqrt(3)/3"};
    Chart chart;
    chart.r = 1;
    chart.psi = [](const Vec& x) { return vec2(x[0] + x[1] * x[1] * x[1] - x[1], x[0]); };
    chart.dpsi = [](const Vec& x) { return mat2(1.0, 3.0 * x[1] * x[1] - 1.0, 1.0, 0.0); };
    chart.psi_inv = [](const Vec& xi) { return vec2(xi[1], cubic_branch_root(xi[0] - xi[1])); };
    // Both x2 and the projection psi^-1(xi1, 0) must lie on the branch.
    chart.chart_domain = {[](const Vec& x) {
                              const double g_min = kInvSqrt3 * kInvSqrt3 * kInvSqrt3 - kInvSqrt3;
                              return x[1] > kInvSqrt3 + kDomainMargin &&
                                     x[0] + x[1] * x[1] * x[1] - x[1] > g_min + kDomainMargin;
                          },
                          "x2 > sqrt(3)/3 and x1 + x2^3 - x2 > -2/(3 sqrt 3)"};
    s.chart = chart;

    InwfData inwf;
    inwf.Fstar = [](const Vec& xi1) { return Vec::Constant(1, -cubic_branch_root(xi1[0])); };
    // Q = [[1, f'], [0, 1]] with f' = (x2 - f(xi1, 0)) / x1 written without the 0/0.
    inwf.Q_equiv = [](const Vec& x) {
        const double x2 = x[1];
        const double y = cubic_branch_root(x[0] + x2 * x2 * x2 - x2);
        return mat2(1.0, -1.0 / (y * y + y * x2 + x2 * x2 - 1.0), 0.0, 1.0);
    };
    s.inwf = inwf;

    s.manifold_branch = branch;
    s.reference_points = {{"x0_minus", vec2(1.0, 0.7)}, {"x_p", vec2(0.0, 1.0)},
                          {"kernel_rule_quoted", vec2(0.0, 0.109)}};
    s.box_lower = vec2(-0.5, 0.65);
    s.box_upper = vec2(0.5, 1.5);
    s.notes = {"E = [[1, 3 x2^2 - 1], [0, 0]], F = (-x2, x1)",
               "chart psi = (x1 + x2^3 - x2, x1) on x2 > sqrt(3)/3, x1 + x2^3 - x2 > -2/(3 sqrt 3); inverse by Newton on that branch",
               "consistency manifold: x1 = 0, x2 > sqrt(3)/3"};
    return s;
}

Scenario scenario_circuit() {
    Scenario s;
    s.name = "circuit";
    DaeSystem& sys = s.system;
    sys.n = 3;
    sys.E = [](const Vec& e) {
        Mat m = Mat::Zero(3, 3);
        m(0, 1) = -e[1];
        m(0, 2) = 1.0;
        return m;
    };
    sys.F = [](const Vec& e) {
        const double x = e[0], y = e[1], z = e[2];
        return vec3(x, y + z, x - y * y - 2.0 * y);
    };
    sys.dF = [](const Vec& e) {
        Mat m(3, 3);
        m << 1, 0, 0, 0, 1, 1, 1, -2.0 * e[1] - 2.0, 0;
        return m;
    };
    sys.dE = [](const Vec&) {
        Mat dy = Mat::Zero(3, 3);
        dy(0, 1) = -1.0;
        return std::vector<Mat>{Mat::Zero(3, 3), dy, Mat::Zero(3, 3)};
    };
    // y = 1 bounds the constant-rank set; y = -1 is where the chart Jacobian
    // and the perturbed field (denominators 1 + y) degenerate.
    sys.domain = {[](const Vec& e) {
                      return std::abs(e[1] - 1.0) > kDomainMargin && std::abs(e[1] + 1.0) > kDomainMargin;
                  },
                  "y != 1 and y != -1"};
    sys.nominal_point = vec3(0.0, 0.0, 0.0);
    attach_compression_reference(sys);

    const Region chart_domain{[](const Vec& e) {
                                  return e[1] > -1.0 + kDomainMargin && e[1] < 1.0 - kDomainMargin;
                              },
                              "-1 < y < 1"};
    Chart chart;
    chart.r = 1;
    chart.psi = [](const Vec& e) {
        const double x = e[0], y = e[1], z = e[2];
        return vec3(-0.5 * y * y + z, y + z, x - y * y - 2.0 * y);
    };
    chart.dpsi = [](const Vec& e) {
        const double y = e[1];
        Mat m(3, 3);
        m << 0, -y, 1, 0, 1, 1, 1, -2.0 * y - 2.0, 0;
        return m;
    };
    chart.psi_inv = [](const Vec& xi) {
        // y^2/2 + y + (xi1 - xi2) = 0, root with y > -1
        const double disc = 1.0 - 2.0 * (xi[0] - xi[1]);
        if (!(disc > 0.0) || !(disc < 4.0))
            throw ChartRangeError("circuit chart: coordinates outside the image of -1 < y < 1", xi);
        const double y = -1.0 + std::sqrt(disc);
        return vec3(xi[2] + y * y + 2.0 * y, y, xi[1] - y);
    };
    chart.chart_domain = chart_domain;
    s.chart = chart;

    InwfData inwf;
    inwf.Fstar = [](const Vec& xi1) { return Vec(-2.0 * xi1); };
    inwf.Q_equiv = [](const Vec&) {
        Mat q(3, 3);
        q << 1, -2, -1, 0, 1, 0, 0, 0, 1;
        return q;
    };
    s.inwf = inwf;

    s.manifold_branch = chart_domain;
    s.reference_points = {{"eta0_minus", vec3(0.0, 0.0, 0.1)}, {"eta_p", vec3(0.0, 0.0, 0.0)}};
    s.box_lower = Vec::Constant(3, -0.5);
    s.box_upper = Vec::Constant(3, 0.5);
    s.notes = {"state eta = (x, y, z) = (resistor current, resistor voltage, capacitor voltage)",
               "C = 1, a(x, y) = x - y^2 - 2y, b(x, y) = y",
               "chart psi = (-y^2/2 + z, y + z, x - y^2 - 2y), closed-form inverse on -1 < y < 1",
               "constant-rank set is quoted as y != 1 while the perturbed field is singular at "
               "y = -1; both are excluded from the domain"};
    return s;
}

Scenario scenario_contact() {
    Scenario s;
    s.name = "contact";
    DaeSystem& sys = s.system;
    sys.n = 3;
    sys.E = [](const Vec& x) {
        Mat m = Mat::Zero(3, 3);
        m(0, 0) = x[1];
        m(0, 2) = -1.0;
        return m;
    };
    sys.F = [](const Vec& x) { return vec3(-x[2], x[0], x[1]); };
    sys.dF = [](const Vec&) {
        Mat m(3, 3);
        m << 0, 0, -1, 1, 0, 0, 0, 1, 0;
        return m;
    };
    sys.dE = [](const Vec&) {
        std::vector<Mat> d(3, Mat::Zero(3, 3));
        d[1](0, 0) = 1.0;
        return d;
    };
    sys.domain = Region::everywhere("R^3");
    sys.nominal_point = Vec::Zero(3);
    attach_compression_reference(sys);
    s.manifold_branch = Region::everywhere("R^3");
    s.reference_points = {{"origin", Vec::Zero(3)}};
    s.box_lower = Vec::Constant(3, -1.0);
    s.box_upper = Vec::Constant(3, 1.0);
    s.notes = {"ker E = span{d1 + x2 d3, d2}; [d2, d1 + x2 d3] = d3 leaves the span"};
    return s;
}

Scenario scenario_linear(const Mat& E, const Mat& H, const Decoupling& d, std::string name) {
    const Index n = E.rows();
    if (n == 0 || E.cols() != n || H.rows() != n || H.cols() != n)
        throw ValidationError("linear scenario: E and H must be square of equal size");
    if (d.Q.rows() != n || d.Q.cols() != n || d.P.rows() != n || d.P.cols() != n)
        throw ValidationError("linear scenario: Q and P must be n x n");
    if (d.A1.rows() != d.A1.cols() || d.A1.rows() > n)
        throw ValidationError("linear scenario: A1 must be square with at most n rows");
    num::require_finite(E, "linear scenario E");
    num::require_finite(H, "linear scenario H");
    const Index n1 = d.A1.rows();
    const Index n2 = n - n1;
    if (n2 == 0)
        throw ValidationError("linear scenario: no algebraic part (n2 = 0), this is a pure ODE");

    Eigen::FullPivLU<Mat> lu_q(d.Q), lu_p(d.P);
    if (!lu_q.isInvertible() || !lu_p.isInvertible())
        throw ValidationError("linear scenario: Q and P must be invertible");
    const Mat p_inv = lu_p.inverse();
    Mat e_target = blockdiag_identity_zero(n, n1);
    Mat h_target = Mat::Zero(n, n);
    h_target.topLeftCorner(n1, n1) = d.A1;
    h_target.bottomRightCorner(n2, n2).setIdentity();
    const double e_gap = (d.Q * E * p_inv - e_target).cwiseAbs().maxCoeff();
    const double h_gap = (d.Q * H * p_inv - h_target).cwiseAbs().maxCoeff();
    if (e_gap > 1e-9 || h_gap > 1e-9) {
        std::ostringstream msg;
        msg << "linear scenario: decoupling does not produce the block form (|QEP^-1 - diag(I,0)| = "
            << e_gap << ", |QHP^-1 - diag(A1,I)| = " << h_gap << ")";
        throw ValidationError(msg.str());
    }

    Scenario s;
    s.name = std::move(name);
    DaeSystem& sys = s.system;
    sys.n = n;
    sys.E = [E](const Vec&) { return E; };
    sys.F = [H](const Vec& x) { return Vec(H * x); };
    sys.dF = [H](const Vec&) { return H; };
    sys.dE = [n](const Vec&) { return std::vector<Mat>(static_cast<std::size_t>(n), Mat::Zero(n, n)); };
    sys.domain = Region::everywhere("R^" + std::to_string(n));
    sys.nominal_point = Vec::Zero(n);
    attach_compression_reference(sys);

    const Mat P = d.P;
    Chart chart;
    chart.r = n1;
    chart.psi = [P](const Vec& x) { return Vec(P * x); };
    chart.psi_inv = [p_inv](const Vec& xi) { return Vec(p_inv * xi); };
    chart.dpsi = [P](const Vec&) { return P; };
    chart.chart_domain = sys.domain;
    s.chart = chart;

    const Mat A1 = d.A1;
    const Mat Q = d.Q;
    s.inwf = InwfData{[A1](const Vec& xi1) { return Vec(A1 * xi1); }, [Q](const Vec&) { return Q; }};
    s.manifold_branch = sys.domain;
    s.reference_points = {{"origin", Vec::Zero(n)}};
    s.box_lower = Vec::Constant(n, -1.0);
    s.box_upper = Vec::Constant(n, 1.0);
    s.linear = LinearData{E, H, d.Q, d.P, d.A1};
    s.notes = {"linear index-1 DAE E x' = H x with user-supplied decoupling"};
    return s;
}

Scenario scenario_inwf(const Scenario& base) {
    const Chart& chart = base.require_chart();
    const InwfData& inwf = base.require_inwf();
    const Index n = base.system.n;
    const Index r = chart.r;

    Scenario s;
    s.name = base.name + "_inwf";
    DaeSystem& sys = s.system;
    sys.n = n;
    const Mat e_const = blockdiag_identity_zero(n, r);
    sys.E = [e_const](const Vec&) { return e_const; };
    sys.F = [fstar = inwf.Fstar, r, n](const Vec& xi) {
        Vec out(n);
        out.head(r) = fstar(Vec(xi.head(r)));
        out.tail(n - r) = xi.tail(n - r);
        return out;
    };
    sys.dE = [n](const Vec&) { return std::vector<Mat>(static_cast<std::size_t>(n), Mat::Zero(n, n)); };
    auto in_image = [chart](const Vec& xi) {
        try {
            return chart.chart_domain(chart.psi_inv(xi));
        } catch (const Error&) {
            return false;
        }
    };
    sys.domain = {in_image, "image of (" + chart.chart_domain.description + ") under psi"};
    sys.nominal_point = chart.psi(base.system.nominal_point);
    attach_compression_reference(sys);

    Chart id;
    id.r = r;
    id.psi = [](const Vec& xi) { return xi; };
    id.psi_inv = [in_image](const Vec& xi) {
        if (!in_image(xi)) throw ChartRangeError("normal-form chart: point outside the chart image", xi);
        return xi;
    };
    id.dpsi = [n](const Vec&) { return Mat(Mat::Identity(n, n)); };
    id.chart_domain = sys.domain;
    s.chart = id;
    s.inwf = InwfData{inwf.Fstar, [n](const Vec&) { return Mat(Mat::Identity(n, n)); }};
    s.manifold_branch = sys.domain;
    for (const auto& [key, x] : base.reference_points)
        if (chart.chart_domain(x)) s.reference_points[key] = chart.psi(x);
    s.box_lower = sys.nominal_point.array() - 0.5;
    s.box_upper = sys.nominal_point.array() + 0.5;
    s.notes = {"normal form of '" + base.name + "': xi1' = F*(xi1), 0 = xi2"};
    return s;
}

std::vector<std::string> builtin_names() { return {"cubic", "circuit", "contact", "linear"}; }

Scenario builtin_scenario(const std::string& name) {
    if (name == "cubic") return scenario_cubic();
    if (name == "circuit") return scenario_circuit();
    if (name == "contact") return scenario_contact();
    if (name == "linear") {
        Mat E = Mat::Zero(2, 2);
        E(0, 0) = 1.0;
        Mat H = Mat::Identity(2, 2);
        H(0, 0) = -2.0;
        return scenario_linear(E, H, {Mat::Identity(2, 2), Mat::Identity(2, 2), Mat::Constant(1, 1, -2.0)});
    }
    throw ConfigError("unknown scenario '" + name + "'");
}

num::RowCompression compress(const DaeSystem& sys, const Vec& x, double rel_tol) {
    const Mat e = sys.E(x);
    if (sys.compression_reference.Q.size() == 0) return num::canonical_row_compress(e, rel_tol);
    return num::row_compress(e, rel_tol, sys.compression_reference);
}

Vec constraint_map(const DaeSystem& sys, const Vec& x) {
    const auto c = compress(sys, x);
    return c.constraint_rows() * sys.F(x);
}

Mat constraint_jacobian(const DaeSystem& sys, const Vec& x) {
    if (!sys.dE || !sys.dF)
        return num::fd_jacobian([&sys](const Vec& v) { return constraint_map(sys, v); }, x,
                                num::fd_step(x));
    // With N = Q2^T spanning the left kernel of E and constant rank,
    //   dF2/dx_k = N^T dF/dx_k - N^T dE/dx_k E^+ F + O(|F2|).
    // The dropped terms vanish on F2 = 0.
    const Mat e = sys.E(x);
    const auto c = compress(sys, x);
    const Index r = c.rank;
    Eigen::JacobiSVD<Mat> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    Vec coeff = svd.matrixU().leftCols(r).transpose() * sys.F(x);
    for (Index i = 0; i < r; ++i) coeff[i] /= sv[i];
    const Vec pinv_F = svd.matrixV().leftCols(r) * coeff;

    const Mat n_t = c.constraint_rows();
    Mat jac = n_t * sys.dF(x);
    const std::vector<Mat> de = sys.dE(x);
    for (Index k = 0; k < sys.n; ++k) jac.col(k) -= n_t * (de[static_cast<std::size_t>(k)] * pinv_F);
    return jac;
}

Vec consistency_residual(const Scenario& s, const Vec& x) {
    if (x.size() != s.system.n) throw InvalidInput("consistency_residual: state dimension mismatch");
    if (!s.system.domain(x)) {
        std::ostringstream msg;
        msg << "consistency_residual: [" << x.transpose() << "] outside domain ("
            << s.system.domain.description << ")";
        throw DomainError(msg.str(), x);
    }
    return constraint_map(s.system, x);
}

Vec project_to_constraints(const DaeSystem& sys, const Vec& x, double tol) {
    if (constraint_map(sys, x).size() == 0) return x;
    num::NewtonOptions opt;
    opt.tol = tol;
    return num::newton_solve([&sys](const Vec& v) { return constraint_map(sys, v); },
                             [&sys](const Vec& v) { return constraint_jacobian(sys, v); }, x, opt)
        .x;
}

}  // namespace dae::model
