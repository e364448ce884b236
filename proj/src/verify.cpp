#include "arprl/verify.hpp"

#include <cmath>
#include <iostream>
#include <sstream>

#include "arprl/attack.hpp"
#include "arprl/eval.hpp"
#include "arprl/mi.hpp"
#include "arprl/nn.hpp"
#include "arprl/rng.hpp"

namespace arprl {

FdCheck check_gradients(const std::vector<Param*>& params,
                        const std::function<Tensor(Tape&)>& build_loss, double h,
                        double kink_guard) {
    FdCheck result;

    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        Tensor loss = build_loss(tape);
        if (tape.min_abs_relu_input() < kink_guard) {
            result.rejected = true;
            return result;
        }
        for (Param* p : params) p->zero_grad();
        tape.backward(loss);
        for (Param* p : params) analytic.push_back(p->grad.v);
        for (Param* p : params) p->zero_grad();
    }

    auto value_at = [&build_loss]() {
        Tape tape;
        return build_loss(tape).scalar();
    };

    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Param* p = params[pi];
        for (std::size_t k = 0; k < p->value.v.size(); ++k) {
            const double saved = p->value.v[k];
            p->value.v[k] = saved + h;
            const double up = value_at();
            p->value.v[k] = saved - h;
            const double down = value_at();
            p->value.v[k] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double a = analytic[pi][k];
            const double err = std::abs(a - fd);
            if (err > 1e-7) {
                const double rel = err / std::max(std::abs(a), std::abs(fd));
                result.max_rel_err = std::max(result.max_rel_err, rel);
            }
            ++result.checked;
        }
    }
    return result;
}

bool SuiteResult::all_passed() const {
    for (const auto& c : checks)
        if (!c.passed) return false;
    return true;
}

int SuiteResult::passed_count() const {
    int n = 0;
    for (const auto& c : checks)
        if (c.passed) ++n;
    return n;
}

void print_suite(const SuiteResult& suite) {
    for (const auto& c : suite.checks)
        std::cout << "[" << (c.passed ? "PASS" : "FAIL") << "] " << suite.suite << "/" << c.name
                  << (c.detail.empty() ? "" : "  " + c.detail) << "\n";
    std::cout << suite.suite << ": " << suite.passed_count() << "/" << suite.checks.size()
              << " checks passed\n";
}

namespace {

constexpr double kRelTol = 1e-4;

Param random_param(Index r, Index c, Rng& rng, double lo = -2.0, double hi = 2.0) {
    Mat m(r, c);
    for (auto& v : m.v) v = rng.uniform(lo, hi);
    return Param(std::move(m));
}

// Runs `instances` seeded instances of one gradient check, resampling any
// instance the kink guard rejects, and folds them into one CheckResult.
CheckResult run_fd_instances(
    const std::string& name, std::uint64_t seed, int instances,
    const std::function<FdCheck(std::uint64_t)>& make_and_check) {
    CheckResult out;
    out.name = name;
    double worst = 0.0;
    Index total = 0;
    for (int k = 0; k < instances; ++k) {
        FdCheck fd;
        int attempt = 0;
        do {
            fd = make_and_check(derive_seed(seed, {static_cast<std::uint64_t>(k),
                                                   static_cast<std::uint64_t>(attempt)}));
            ++attempt;
        } while (fd.rejected && attempt < 50);
        if (fd.rejected) {
            out.passed = false;
            out.detail = "could not find a kink-free instance";
            return out;
        }
        worst = std::max(worst, fd.max_rel_err);
        total += fd.checked;
    }
    out.passed = worst < kRelTol;
    std::ostringstream os;
    os << "max rel err " << worst << " over " << total << " partials, " << instances
       << " instances";
    out.detail = os.str();
    return out;
}

FdCheck fd_on_params(std::vector<Param*> params, const std::function<Tensor(Tape&)>& build) {
    return check_gradients(std::move(params), build);
}

} // namespace

SuiteResult run_gradient_suite(std::uint64_t seed, int instances) {
    SuiteResult suite;
    suite.suite = "gradients";

    struct Primitive {
        const char* name;
        std::function<FdCheck(std::uint64_t)> check;
    };

    std::vector<Primitive> prims;

    prims.push_back({"matmul", [](std::uint64_t s) {
        Rng rng(s);
        Param a = random_param(3, 4, rng), b = random_param(4, 2, rng);
        return fd_on_params({&a, &b}, [&](Tape& t) {
            return mean_all(matmul(t.param(a), t.param(b)));
        });
    }});
    prims.push_back({"add_same_shape", [](std::uint64_t s) {
        Rng rng(s);
        Param a = random_param(3, 4, rng), b = random_param(3, 4, rng);
        return fd_on_params({&a, &b}, [&](Tape& t) {
            return mean_all(mul(add(t.param(a), t.param(b)), t.param(a)));
        });
    }});
    prims.push_back({"add_row_broadcast", [](std::uint64_t s) {
        Rng rng(s);
        Param a = random_param(3, 4, rng), b = random_param(1, 4, rng);
        return fd_on_params({&a, &b}, [&](Tape& t) {
            return mean_all(sigmoid(add(t.param(a), t.param(b))));
        });
    }});
    prims.push_back({"add_scalar_broadcast", [](std::uint64_t s) {
        Rng rng(s);
        Param a = random_param(3, 4, rng), b = random_param(1, 1, rng);
        return fd_on_params({&a, &b}, [&](Tape& t) {
            return mean_all(tanh_fn(add(t.param(a), t.param(b))));
        });
    }});
    prims.push_back({"sub_mul", [](std::uint64_t s) {
        Rng rng(s);
        Param a = random_param(4, 3, rng), b = random_param(4, 3, rng);
        return fd_on_params({&a, &b}, [&](Tape& t) {
            return sum_all(mul(sub(t.param(a), t.param(b)), t.param(b)));
        });
    }});
    prims.push_back({"scale_add_const_neg", [](std::uint64_t s) {
        Rng rng(s);
        Param a = random_param(2, 5, rng);
        return fd_on_params({&a}, [&](Tape& t) {
            return mean_all(neg(add_const(scale(t.param(a), 1.7), 0.3)));
        });
    }});
    prims.push_back({"relu", [](std::uint64_t s) {
        Rng rng(s);
        Param a = random_param(4, 4, rng);
        return fd_on_params({&a}, [&](Tape& t) { return mean_all(relu(t.param(a))); });
    }});
    prims.push_back({"sigmoid", [](std::uint64_t s) {
        Rng rng(s);
        Param a = random_param(4, 4, rng, -6.0, 6.0);
        return fd_on_params({&a}, [&](Tape& t) { return mean_all(sigmoid(t.param(a))); });
    }});
    prims.push_back({"tanh", [](std::uint64_t s) {
        Rng rng(s);
        Param a = random_param(4, 4, rng, -4.0, 4.0);
        return fd_on_params({&a}, [&](Tape& t) { return mean_all(tanh_fn(t.param(a))); });
    }});
    prims.push_back({"softplus", [](std::uint64_t s) {
        Rng rng(s);
        Param a = random_param(4, 4, rng, -10.0, 10.0);
        return fd_on_params({&a}, [&](Tape& t) { return mean_all(softplus(t.param(a))); });
    }});
    prims.push_back({"exp", [](std::uint64_t s) {
        Rng rng(s);
        Param a = random_param(4, 4, rng, -3.0, 3.0);
        return fd_on_params({&a}, [&](Tape& t) { return mean_all(exp_fn(t.param(a))); });
    }});
    prims.push_back({"log", [](std::uint64_t s) {
        Rng rng(s);
        Param a = random_param(4, 4, rng, 0.1, 5.0);
        return fd_on_params({&a}, [&](Tape& t) { return mean_all(log_fn(t.param(a))); });
    }});
    prims.push_back({"logsumexp_rows", [](std::uint64_t s) {
        Rng rng(s);
        Param a = random_param(5, 6, rng, -8.0, 8.0);
        return fd_on_params({&a}, [&](Tape& t) { return mean_all(logsumexp_rows(t.param(a))); });
    }});
    prims.push_back({"log_mean_exp", [](std::uint64_t s) {
        Rng rng(s);
        Param a = random_param(6, 1, rng, -8.0, 8.0);
        return fd_on_params({&a}, [&](Tape& t) { return log_mean_exp(t.param(a)); });
    }});
    prims.push_back({"mean_sum", [](std::uint64_t s) {
        Rng rng(s);
        Param a = random_param(3, 7, rng);
        return fd_on_params({&a}, [&](Tape& t) {
            return add(mean_all(t.param(a)), scale(sum_all(t.param(a)), 0.25));
        });
    }});
    prims.push_back({"concat_cols", [](std::uint64_t s) {
        Rng rng(s);
        Param a = random_param(4, 2, rng), b = random_param(4, 3, rng);
        return fd_on_params({&a, &b}, [&](Tape& t) {
            return mean_all(sigmoid(concat_cols(t.param(a), t.param(b))));
        });
    }});
    prims.push_back({"gather_rows", [](std::uint64_t s) {
        Rng rng(s);
        Param a = random_param(5, 3, rng);
        std::vector<Index> order = rng.permutation(5);
        order.push_back(order[0]); // duplicated row exercises grad accumulation
        return fd_on_params({&a}, [&, order](Tape& t) {
            return mean_all(mul(gather_rows(t.param(a), order),
                                gather_rows(t.param(a), order)));
        });
    }});
    prims.push_back({"cross_entropy", [](std::uint64_t s) {
        Rng rng(s);
        Param logits = random_param(6, 3, rng, -4.0, 4.0);
        std::vector<int> targets(6);
        for (auto& y : targets) y = static_cast<int>(rng.below(3));
        return fd_on_params({&logits}, [&, targets](Tape& t) {
            return cross_entropy_mean(t.param(logits), targets);
        });
    }});
    prims.push_back({"cross_entropy_soft", [](std::uint64_t s) {
        Rng rng(s);
        Param logits = random_param(6, 3, rng, -4.0, 4.0);
        std::vector<double> dist = {0.2, 0.5, 0.3};
        return fd_on_params({&logits}, [&, dist](Tape& t) {
            return cross_entropy_mean_soft(t.param(logits), dist);
        });
    }});

    for (const auto& p : prims)
        suite.checks.push_back(run_fd_instances(p.name, derive_seed(seed, {double_bits(1.0),
                               static_cast<std::uint64_t>(&p - prims.data())}), instances, p.check));

    // composed losses on a small bundle, including the input-gradient path
    // that the PGD attack relies on
    struct Composed {
        const char* name;
        int which; // 0=L1 1=L2 2=L3 3=objective 4=input gradient
    };
    const Composed composed[] = {{"loss_l1", 0},
                                 {"loss_l2_mine", 1},
                                 {"loss_l3_js", 2},
                                 {"theta_objective", 3},
                                 {"input_gradient", 4}};
    for (const auto& c : composed) {
        auto check = [&c](std::uint64_t s) {
            Rng rng(s);
            ModelBundle b = build_default_networks(DatasetKind::toy, 3, 2, 2);
            init_bundle(b, derive_seed(s, {91}));
            const Index B = 6;
            Mat x(B, 3);
            for (auto& v : x.v) v = rng.uniform(-2.0, 2.0);
            std::vector<int> y(B), u(B);
            for (auto& v : y) v = static_cast<int>(rng.below(2));
            for (auto& v : u) v = static_cast<int>(rng.below(2));
            Batch batch = make_batch(x, y, u, 2, rng);
            Mat x_adv = x;
            for (auto& v : x_adv.v) v += rng.uniform(-0.01, 0.01);

            std::vector<Param*> params;
            Param x_param(x);
            auto add_net = [&params](Mlp& net) {
                for (Param* p : net.params()) params.push_back(p);
            };
            std::function<Tensor(Tape&)> build;
            switch (c.which) {
                case 0:
                    add_net(b.f);
                    add_net(b.g);
                    build = [&b, &batch](Tape& t) {
                        return privacy_loss_l1(t, b.g, b.f, batch);
                    };
                    break;
                case 1:
                    add_net(b.f);
                    add_net(b.t);
                    build = [&b, &batch](Tape& t) {
                        return mine_objective_l2(t, b.t, b.f, batch);
                    };
                    break;
                case 2:
                    add_net(b.f);
                    add_net(b.h);
                    build = [&b, &batch](Tape& t) {
                        return js_objective_l3(t, b.h, b.f, batch);
                    };
                    break;
                case 3:
                    add_net(b.f);
                    add_net(b.g);
                    add_net(b.t);
                    add_net(b.h);
                    build = [&b, &batch, x_adv](Tape& t) {
                        Tensor l1 = privacy_loss_l1(t, b.g, b.f, batch);
                        Tensor l2 = mine_objective_l2_at(t, b.t, b.f, batch, t.constant(x_adv));
                        Tensor l3 = js_objective_l3(t, b.h, b.f, batch);
                        return add(add(scale(l1, 0.1), scale(l2, 0.5)), scale(l3, 0.4));
                    };
                    break;
                case 4:
                    params.push_back(&x_param);
                    build = [&b, &batch, &x_param](Tape& t) {
                        return mine_objective_l2_at(t, b.t, b.f, batch, t.param(x_param));
                    };
                    break;
            }
            return fd_on_params(params, build);
        };
        suite.checks.push_back(run_fd_instances(c.name,
                                                derive_seed(seed, {double_bits(2.0),
                                                                   static_cast<std::uint64_t>(c.which)}),
                                                instances, check));
    }
    return suite;
}

SuiteResult run_mi_oracle_suite(std::uint64_t seed, int joints, bool with_gaussian) {
    SuiteResult suite;
    suite.suite = "mi-oracles";

    {
        CheckResult c;
        c.name = "closed_forms";
        const double mi_table = exact_mi_discrete(
            DiscreteJoint(Mat(2, 2, {0.4, 0.1, 0.1, 0.4})));
        const bool ok_table = std::abs(mi_table - 0.19274475702175752) < 1e-9;
        const bool ok_g0 = gaussian_mi(0.0) == 0.0;
        const bool ok_g5 = std::abs(gaussian_mi(0.5) - 0.14384103622589045) < 1e-9;
        const bool ok_g9 = std::abs(gaussian_mi(0.9) - 0.8303656034108254) < 1e-9;
        c.passed = ok_table && ok_g0 && ok_g5 && ok_g9;
        suite.checks.push_back(c);
    }

    {
        CheckResult c;
        c.name = "sandwich_dv_mi_club";
        int violations = 0;
        Rng rng(derive_seed(seed, {41}));
        for (int k = 0; k < joints; ++k) {
            const Index na = 2 + static_cast<Index>(rng.below(7));
            const Index nb = 2 + static_cast<Index>(rng.below(7));
            const DiscreteJoint joint = random_joint(na, nb, rng);
            Mat critic(na, nb);
            for (auto& v : critic.v) v = rng.uniform(-2.0, 2.0);
            const double mi = exact_mi_discrete(joint);
            if (dv_functional_exact(joint, critic) > mi + 1e-12) ++violations;
            if (club_upper_bound_exact(joint) < mi - 1e-12) ++violations;
            if (js_functional_exact(joint, critic) > js_functional_supremum(joint) + 1e-12)
                ++violations;
        }
        c.passed = violations == 0;
        c.detail = std::to_string(joints) + " joints, " + std::to_string(violations) + " violations";
        suite.checks.push_back(c);
    }

    if (with_gaussian) {
        Rng rng(derive_seed(seed, {42}));
        auto gaussian_pairs = [&rng](double rho, Index n) {
            Mat a(n, 1), b(n, 1);
            const double mix = std::sqrt(1.0 - rho * rho);
            for (Index i = 0; i < n; ++i) {
                const double s = rng.normal();
                a.at(i, 0) = s;
                b.at(i, 0) = rho * s + mix * rng.normal();
            }
            return std::pair<Mat, Mat>(std::move(a), std::move(b));
        };
        double js_scores[2] = {0.0, 0.0};
        int idx = 0;
        for (double rho : {0.5, 0.9}) {
            auto [a, b] = gaussian_pairs(rho, 10000);
            const double truth = gaussian_mi(rho);
            const double est = mine_estimate(a, b, nullptr, 0, derive_seed(seed, {43, double_bits(rho)}));
            CheckResult c;
            c.name = "mine_gaussian_rho_" + format_double(rho);
            c.passed = std::abs(est - truth) <= 0.2 * truth;
            c.detail = "estimate " + format_double(est) + " vs true " + format_double(truth);
            suite.checks.push_back(c);
            js_scores[idx++] = js_estimate(a, b, nullptr, 0, derive_seed(seed, {44, double_bits(rho)}));
        }
        CheckResult c;
        c.name = "js_monotone_in_correlation";
        c.passed = std::isfinite(js_scores[0]) && std::isfinite(js_scores[1]) &&
                   js_scores[1] > js_scores[0];
        c.detail = "score(0.5)=" + format_double(js_scores[0]) +
                   " score(0.9)=" + format_double(js_scores[1]);
        suite.checks.push_back(c);
    }
    return suite;
}

SuiteResult run_bounds_discrete_suite(std::uint64_t seed, int joints) {
    SuiteResult suite;
    suite.suite = "bounds-discrete";
    Rng rng(derive_seed(seed, {51}));
    int cap_violations = 0, cond_violations = 0, total_form_violations = 0;
    for (int k = 0; k < joints; ++k) {
        const Index nz = 2 + static_cast<Index>(rng.below(7));
        const DiscreteJoint3 joint = random_joint3(nz, rng);
        std::vector<double> embed(static_cast<std::size_t>(nz));
        for (std::size_t attempts = 0;; ++attempts) {
            for (auto& e : embed) e = rng.uniform(-1.0, 1.0);
            double min_gap = 2.0;
            for (std::size_t i = 0; i < embed.size(); ++i)
                for (std::size_t j = i + 1; j < embed.size(); ++j)
                    min_gap = std::min(min_gap, std::abs(embed[i] - embed[j]));
            if (min_gap > 1e-3 || attempts > 100) break;
        }
        const BoundReport r = check_bounds_discrete_oracle(joint, embed);
        for (const auto& c : r.checks) {
            if (c.name == "theorem5_inference_cap" && !c.holds) ++cap_violations;
            if (c.name == "theorem3_conditional_risk" && !c.holds) ++cond_violations;
            if (c.name == "theorem3_total_risk_form" && !c.holds) ++total_form_violations;
        }
    }
    {
        CheckResult c;
        c.name = "theorem5_cap_bayes_adversary";
        c.passed = cap_violations == 0;
        c.detail = std::to_string(joints) + " joints, " + std::to_string(cap_violations) +
                   " violations";
        suite.checks.push_back(c);
    }
    {
        CheckResult c;
        c.name = "theorem3_conditional_risk_all_classifiers";
        c.passed = cond_violations == 0;
        c.detail = std::to_string(joints) + " joints, " + std::to_string(cond_violations) +
                   " violations";
        suite.checks.push_back(c);
    }
    {
        // informational: the averaged-risk reading is not implied by the
        // triangle argument and does fail on some joints
        CheckResult c;
        c.name = "theorem3_total_risk_form_report";
        c.passed = true;
        c.detail = std::to_string(total_form_violations) + "/" + std::to_string(joints) +
                   " joints violate the averaged form (reported, not asserted)";
        suite.checks.push_back(c);
    }
    return suite;
}

} // namespace arprl
