#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dae/numkit.hpp"

namespace dae::model {

using num::Index;
using num::Mat;
using num::MatrixFunction;
using num::Vec;
using num::VectorFunction;

/// Open set given by a membership predicate plus a readable description.
struct Region {
    std::function<bool(const Vec&)> contains;
    std::string description;

    bool operator()(const Vec& x) const { return !contains || contains(x); }
    static Region everywhere(std::string description = "R^n");
};

/// Margin kept between strict domain guards and singular loci.
inline constexpr double kDomainMargin = 1e-6;

/// E(x) x' = F(x) on an open set.
struct DaeSystem {
    Index n = 0;
    MatrixFunction E;
    VectorFunction F;
    /// Optional partial derivatives dE/dx_k, k = 0..n-1.
    std::function<std::vector<Mat>(const Vec&)> dE;
    /// Optional Jacobian of F.
    MatrixFunction dF;
    Region domain;
    Vec nominal_point;
    /// Row compression at the nominal point with canonical blocks; all other
    /// compressions are aligned to it so that F2 varies continuously.
    num::RowCompression compression_reference;

    Mat jacobian_F(const Vec& x) const;
};

/// Local diffeomorphism psi = (xi1, xi2) with xi1 of dimension r.
struct Chart {
    Index r = 0;
    VectorFunction psi;
    VectorFunction psi_inv;  // throws ChartRangeError outside the image
    MatrixFunction dpsi;
    Region chart_domain;
};

/// Normal-form data: xi1' = F*(xi1), 0 = xi2 reached from E x' = F via the
/// chart and the left multiplier Q(x):  Q E (Dpsi)^-1 = diag(I, 0),
/// Q F = (F*(xi1), xi2).
struct InwfData {
    VectorFunction Fstar;
    MatrixFunction Q_equiv;
};

/// Constant-coefficient data of a user-defined linear scenario, kept for
/// serialization.
struct LinearData {
    Mat E, H, Q, P, A1;
};

struct Scenario {
    std::string name;
    DaeSystem system;
    std::optional<Chart> chart;
    std::optional<InwfData> inwf;
    /// Branch condition selecting the local consistency manifold among the
    /// zeros of F2 (e.g. x2 > sqrt(3)/3 for the cubic).
    Region manifold_branch;
    std::map<std::string, Vec> reference_points;
    std::vector<std::string> notes;
    /// Default sampling box for structural analysis.
    Vec box_lower, box_upper;
    std::optional<LinearData> linear;

    const Chart& require_chart() const;
    const InwfData& require_inwf() const;
};

// Built-in scenarios -------------------------------------------------------

/// E = [[1, 3x2^2-1],[0,0]], F = (-x2, x1); chart (x1 + x2^3 - x2, x1) where both x2 and the
/// projected point lie on the branch x2 > sqrt(3)/3.
Scenario scenario_cubic();

/// Capacitor / nonlinear resistor circuit, C = 1, b = y, a = x - y^2 - 2y.
Scenario scenario_circuit();

/// Three-state system whose kernel distribution span{d1 + x2 d3, d2} is not involutive.
Scenario scenario_contact();

struct Decoupling {
    Mat Q, P, A1;
};

/// Linear index-1 DAE E x' = H x with a decoupling (Q, P) such that
/// Q E P^-1 = diag(I, 0) and Q H P^-1 = diag(A1, I).
Scenario scenario_linear(const Mat& E, const Mat& H, const Decoupling& decoupling,
                         std::string name = "linear");

/// The same DAE written in its normal-form coordinates: E = diag(I_r, 0),
/// F = (F*(xi1), xi2), identity chart.
Scenario scenario_inwf(const Scenario& s);

std::vector<std::string> builtin_names();
/// Throws ConfigError for unknown names.
Scenario builtin_scenario(const std::string& name);

// Constraint structure -----------------------------------------------------

/// Row compression of E(x), aligned with the system's nominal compression.
num::RowCompression compress(const DaeSystem& sys, const Vec& x,
                             double rel_tol = num::kDefaultRankTol);

/// F2(x) = Q2(x) F(x): the algebraic constraints (no domain check).
Vec constraint_map(const DaeSystem& sys, const Vec& x);

/// Jacobian of constraint_map by central differences.
Mat constraint_jacobian(const DaeSystem& sys, const Vec& x);

/// F2(x), with domain check.
Vec consistency_residual(const Scenario& s, const Vec& x);

/// Minimum-norm Gauss-Newton projection of x onto {F2 = 0}.
Vec project_to_constraints(const DaeSystem& sys, const Vec& x, double tol = 1e-12);

/// Finalizes `sys.compression_reference` from the nominal point.
void attach_compression_reference(DaeSystem& sys);

}  // namespace dae::model
