#include "arprl/attack.hpp"

#include <cmath>
#include <stdexcept>

namespace arprl {

void AttackConfig::validate() const {
    if (epsilon < 0.0)
        throw std::invalid_argument("AttackConfig: epsilon must be >= 0, got " +
                                    std::to_string(epsilon));
    if (steps < 0) throw std::invalid_argument("AttackConfig: steps must be >= 0");
    if (!(step_fraction > 0.0) || step_fraction > 1.0)
        throw std::invalid_argument("AttackConfig: step_fraction must be in (0, 1]");
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void project_ball(Mat& x_adv, const Mat& x, double eps) {
    for (std::size_t i = 0; i < x_adv.v.size(); ++i) {
        const double lo = x.v[i] - eps, hi = x.v[i] + eps;
        if (x_adv.v[i] < lo) x_adv.v[i] = lo;
        if (x_adv.v[i] > hi) x_adv.v[i] = hi;
    }
}

} // namespace

Mat pgd_attack(const LossFn& loss_fn, const Mat& x, const AttackConfig& cfg) {
    cfg.validate();
    if (cfg.epsilon == 0.0 || cfg.steps == 0) return x;

    const double step = cfg.step_fraction * cfg.epsilon;
    const double dir = (cfg.objective == AttackObjective::task_loss) ? 1.0 : -1.0;
    Mat x_adv = x;
    for (int s = 0; s < cfg.steps; ++s) {
        Tape tape;
        tape.set_param_accumulation(false);
        Tensor leaf = tape.leaf(x_adv);
        Tensor loss = loss_fn(tape, leaf);
        const double lv = loss.scalar();
        if (!std::isfinite(lv))
            throw std::runtime_error("pgd_attack: non-finite loss at step " + std::to_string(s));
        tape.backward(loss);
        const std::vector<double>& g = leaf.grad();
        for (std::size_t i = 0; i < x_adv.v.size(); ++i) x_adv.v[i] += dir * step * sign(g[i]);
        project_ball(x_adv, x, cfg.epsilon);
    }
    return x_adv;
}

namespace {

double eval_l2(Mlp& t, Mlp& f, const Batch& batch, const Mat& x_at) {
    Tape tape;
    double v = mine_objective_l2_at(tape, t, f, batch, tape.constant(x_at)).scalar();
    return v;
}

} // namespace

WorstCaseResult worst_case_mi_search(Mlp& t, Mlp& f, const Batch& batch,
                                     const WorstCaseConfig& cfg) {
    cfg.attack.validate();
    if (batch.size() < 2)
        throw std::invalid_argument("worst_case_mi_search: batch size must be >= 2");
    if (cfg.rounds < 1) throw std::invalid_argument("worst_case_mi_search: rounds must be >= 1");

    const double eps = cfg.attack.epsilon;
    const double step = cfg.attack.step_fraction * eps;
    Mat x_cur = batch.x;

    for (int round = 0; round < cfg.rounds; ++round) {
        if (cfg.update_critic) {
            for (int j = 0; j < cfg.critic_steps; ++j) {
                Tape tape;
                Tensor l2 = mine_objective_l2_at(tape, t, f, batch, tape.constant(x_cur));
                if (!std::isfinite(l2.scalar()))
                    throw std::runtime_error("worst_case_mi_search: non-finite critic objective");
                tape.backward(l2);
                clip_grad_norm(t, cfg.clip_norm);
                sgd_step(t, cfg.critic_lr, StepDirection::ascend);
                f.zero_grads();
            }
        }
        if (eps == 0.0 || cfg.attack.steps == 0) continue;

        // PGD descent with the critic frozen. Signed steps can overshoot, so
        // the running best (never worse than the clean batch) is what we keep.
        double best_l2 = eval_l2(t, f, batch, x_cur);
        Mat best_x = x_cur;
        {
            const double clean = eval_l2(t, f, batch, batch.x);
            if (clean < best_l2) {
                best_l2 = clean;
                best_x = batch.x;
            }
        }
        Mat traj = x_cur;
        for (int s = 0; s < cfg.attack.steps; ++s) {
            Tape tape;
            tape.set_param_accumulation(false);
            Tensor leaf = tape.leaf(traj);
            Tensor l2 = mine_objective_l2_at(tape, t, f, batch, leaf);
            if (!std::isfinite(l2.scalar()))
                throw std::runtime_error("worst_case_mi_search: non-finite search objective");
            tape.backward(l2);
            const std::vector<double>& g = leaf.grad();
            for (std::size_t i = 0; i < traj.v.size(); ++i) traj.v[i] -= step * sign(g[i]);
            project_ball(traj, batch.x, eps);
            const double cand = eval_l2(t, f, batch, traj);
            if (cand <= best_l2) {
                best_l2 = cand;
                best_x = traj;
            }
        }
        x_cur = best_x;
    }

    WorstCaseResult res;
    res.x_adv = std::move(x_cur);
    res.l2_at_adv = eval_l2(t, f, batch, res.x_adv);
    res.l2_at_clean = eval_l2(t, f, batch, batch.x);
    res.max_linf = 0.0;
    for (std::size_t i = 0; i < res.x_adv.v.size(); ++i)
        res.max_linf = std::max(res.max_linf, std::abs(res.x_adv.v[i] - batch.x.v[i]));
    return res;
}

} // namespace arprl
