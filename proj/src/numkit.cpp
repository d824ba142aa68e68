#include "dae/numkit.hpp"

#include <sstream>

namespace dae::num {

namespace {

Vec eval_checked(const VectorFunction& f, const Vec& x, const char* what) {
    Vec out;
    try {
        out = f(x);
    } catch (const EvaluationError&) {
        throw;
    } catch (const std::exception& e) {
        std::ostringstream msg;
        msg << what << ": evaluation failed at probe [" << x.transpose() << "]: " << e.what();
        throw EvaluationError(msg.str(), x);
    }
    if (!out.allFinite()) {
        std::ostringstream msg;
        msg << what << ": non-finite value at probe [" << x.transpose() << "]";
        throw EvaluationError(msg.str(), x);
    }
    return out;
}

// Residual norm at a trial point; +inf when the residual cannot be evaluated there.
double trial_norm(const VectorFunction& residual, const Vec& x, Vec& r) {
    try {
        r = residual(x);
    } catch (const std::exception&) {
        return std::numeric_limits<double>::infinity();
    }
    return r.allFinite() ? r.norm() : std::numeric_limits<double>::infinity();
}

}  // namespace

NewtonResult newton_solve(const VectorFunction& residual, const MatrixFunction& jacobian,
                          const Vec& x0, const NewtonOptions& options) {
    require_finite(x0, "newton_solve: x0");
    Vec x = x0;
    Vec r = eval_checked(residual, x, "newton_solve");
    double rnorm = r.norm();

    for (int iter = 0;; ++iter) {
        if (rnorm <= options.tol) return {x, iter, rnorm};
        if (iter >= options.max_iter)
            throw NoConvergence("newton_solve: iteration limit reached", x, rnorm, iter);

        const Mat J = jacobian(x);
        if (!J.allFinite()) throw EvaluationError("newton_solve: non-finite Jacobian", x);
        if (J.rows() != r.size() || J.cols() != x.size())
            throw InvalidInput("newton_solve: Jacobian shape does not match residual/state");

        Vec step;
        if (J.rows() == J.cols()) {
            Eigen::FullPivLU<Mat> lu(J);
            if (!lu.isInvertible()) {
                Eigen::JacobiSVD<Mat> svd(J);
                const auto& s = svd.singularValues();
                throw SingularSystem("newton_solve: singular Jacobian",
                                     s[s.size() - 1] > 0 ? s[0] / s[s.size() - 1]
                                                         : std::numeric_limits<double>::infinity());
            }
            step = -lu.solve(r);
        } else {
            Eigen::CompleteOrthogonalDecomposition<Mat> cod(J);
            if (cod.rank() < std::min(J.rows(), J.cols()))
                throw SingularSystem("newton_solve: rank-deficient Jacobian",
                                     std::numeric_limits<double>::infinity());
            step = -cod.solve(r);
        }

        double lambda = 1.0;
        bool accepted = false;
        Vec trial_r;
        for (int h = 0; h <= options.max_halvings; ++h, lambda *= 0.5) {
            const Vec trial = x + lambda * step;
            const double tn = trial_norm(residual, trial, trial_r);
            if (tn <= (1.0 - 1e-4 * lambda) * rnorm || tn <= options.tol) {
                x = trial;
                r = trial_r;
                rnorm = tn;
                accepted = true;
                break;
            }
        }
        if (!accepted)
            throw NoConvergence("newton_solve: line search failed to reduce the residual", x, rnorm,
                                iter + 1);
    }
}

NewtonResult newton_solve(const std::function<double(double)>& residual,
                          const std::function<double(double)>& derivative, double x0,
                          const NewtonOptions& options) {
    return newton_solve([&](const Vec& v) { return Vec::Constant(1, residual(v[0])); },
                        [&](const Vec& v) { return Mat::Constant(1, 1, derivative(v[0])); },
                        Vec::Constant(1, x0), options);
}

Mat fd_jacobian(const VectorFunction& f, const Vec& x, double step) {
    if (!(step > 0.0)) throw InvalidInput("fd_jacobian: step must be positive");
    require_finite(x, "fd_jacobian: x");
    const Index n = x.size();
    Mat J;
    Vec probe = x;
    for (Index j = 0; j < n; ++j) {
        probe[j] = x[j] + step;
        const Vec fp = eval_checked(f, probe, "fd_jacobian");
        probe[j] = x[j] - step;
        const Vec fm = eval_checked(f, probe, "fd_jacobian");
        probe[j] = x[j];
        if (j == 0) J.resize(fp.size(), n);
        J.col(j) = (fp - fm) / (2.0 * step);
    }
    return J;
}

double fd_step(const Vec& x, double base) {
    const double scale = 1.0 + (x.size() ? x.cwiseAbs().maxCoeff() : 0.0);
    return std::exp2(std::round(std::log2(base * scale)));
}

}  // namespace dae::num
