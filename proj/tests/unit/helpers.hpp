#pragma once

#include "lpft/model.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace lpft::test {

inline double max_abs(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return max_abs(a - b) / std::max(1.0, max_abs(b));
}

/// Central-difference d f(x) / d theta for every parameter, C x p.
inline Eigen::MatrixXd fd_jacobian(const ModelState& model, const Eigen::VectorXd& x, double step = 1e-6) {
    const Eigen::VectorXd theta = model.flatten();
    Eigen::MatrixXd jac(model.num_classes(), theta.size());
    for (Eigen::Index p = 0; p < theta.size(); ++p) {
        Eigen::VectorXd up = theta, down = theta;
        up(p) += step;
        down(p) -= step;
        jac.col(p) = (forward(model.with_parameters(up), x).logits - forward(model.with_parameters(down), x).logits) / (2 * step);
    }
    return jac;
}

}  // namespace lpft::test
