#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "priorcl/autodiff.hpp"
#include "priorcl/tensor.hpp"

namespace priorcl {

// Central finite-difference verification of tape gradients. The builder gets
// fresh leaves on a fresh tape every evaluation and returns the scalar loss
// node; the checker perturbs every input element in turn.

struct FiniteDiffReport {
    std::size_t checked = 0;
    double max_abs_diff = 0.0;
    double worst_analytic = 0.0; // analytic value at the worst element
    double worst_numeric = 0.0;  // finite-difference value at the worst element
    bool pass = true;
};

using LossBuilder = std::function<NodeId(Tape&, const std::vector<NodeId>&)>;

inline double eval_loss(const std::vector<Tensor>& inputs, const LossBuilder& build) {
    Tape tape;
    std::vector<NodeId> leaves;
    leaves.reserve(inputs.size());
    for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t));
    return tape.scalar(build(tape, leaves));
}

inline FiniteDiffReport finite_diff_check(std::vector<Tensor> inputs, const LossBuilder& build,
                                          double h = 1e-5, double rel_tol = 1e-6,
                                          double abs_floor = 1e-8) {
    Tape tape;
    std::vector<NodeId> leaves;
    leaves.reserve(inputs.size());
    for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t));
    tape.backward(build(tape, leaves));
    std::vector<Tensor> analytic;
    analytic.reserve(leaves.size());
    for (NodeId id : leaves) analytic.push_back(tape.grad(id));

    FiniteDiffReport report;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        for (std::size_t j = 0; j < inputs[i].size(); ++j) {
            const double saved = inputs[i][j];
            inputs[i][j] = saved + h;
            const double up = eval_loss(inputs, build);
            inputs[i][j] = saved - h;
            const double down = eval_loss(inputs, build);
            inputs[i][j] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double a = analytic[i][j];
            const double diff = std::abs(a - fd);
            ++report.checked;
            if (diff > report.max_abs_diff) {
                report.max_abs_diff = diff;
                report.worst_analytic = a;
                report.worst_numeric = fd;
            }
            if (diff > std::max(rel_tol * std::abs(fd), abs_floor)) report.pass = false;
        }
    }
    return report;
}

} // namespace priorcl
