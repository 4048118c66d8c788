#include "lowrank/mdp.hpp"

#include "lowrank/norms.hpp"
#include "lowrank/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace lowrank {

const char* to_string(FactorizationForm form) {
    switch (form) {
        case FactorizationForm::kFormI: return "form_i";
        case FactorizationForm::kFormII: return "form_ii";
        case FactorizationForm::kFullyFactorized: return "fully_factorized";
        case FactorizationForm::kUniform: return "uniform";
    }
    return "unknown";
}

FactorizationForm factorization_form_from_string(const std::string& name) {
    if (name == "form_i" || name == "i") return FactorizationForm::kFormI;
    if (name == "form_ii" || name == "ii") return FactorizationForm::kFormII;
    if (name == "fully_factorized") return FactorizationForm::kFullyFactorized;
    if (name == "uniform") return FactorizationForm::kUniform;
    throw std::invalid_argument("unknown factorization form: " + name);
}

Matrix reconstruct_kernel(const TransitionFactors& factors, Eigen::Index S, Eigen::Index A) {
    Matrix kernel = Matrix::Zero(S * A, S);
    if (const auto* f = std::get_if<FormIFactors>(&factors)) {
        for (std::size_t i = 0; i < f->next_given_state.size(); ++i) {
            const Matrix& u = f->next_given_state[i];
            const Vector& w = f->action_weight[i];
            for (Eigen::Index s = 0; s < S; ++s)
                for (Eigen::Index a = 0; a < A; ++a)
                    kernel.row(sa_index(s, a, A)) += (w(a) * u.col(s)).transpose();
        }
    } else if (const auto* f = std::get_if<FormIIFactors>(&factors)) {
        for (std::size_t i = 0; i < f->state_weight.size(); ++i) {
            const Vector& u = f->state_weight[i];
            const Matrix& w = f->next_given_action[i];
            for (Eigen::Index s = 0; s < S; ++s)
                for (Eigen::Index a = 0; a < A; ++a)
                    kernel.row(sa_index(s, a, A)) += (u(s) * w.col(a)).transpose();
        }
    } else {
        const auto& full = std::get<FullFactors>(factors);
        for (std::size_t i = 0; i < full.next_state.size(); ++i) {
            for (Eigen::Index s = 0; s < S; ++s)
                for (Eigen::Index a = 0; a < A; ++a)
                    kernel.row(sa_index(s, a, A)) +=
                        (full.state_weight[i](s) * full.action_weight[i](a) * full.next_state[i])
                            .transpose();
        }
    }
    return kernel;
}

void LowRankMDP::validate() const {
    const Eigen::Index S = num_states, A = num_actions;
    if (S < 1 || A < 1 || horizon < 1) throw std::invalid_argument("MDP: dimensions must be positive");
    if (rank_param < 2 || rank_param > 2 * std::min<Eigen::Index>(S, A))
        throw std::invalid_argument("MDP: rank parameter outside [2, 2*min(S,A)]");
    if (static_cast<int>(rewards.size()) != horizon || static_cast<int>(kernels.size()) != horizon ||
        static_cast<int>(factors.size()) != horizon)
        throw std::invalid_argument("MDP: per-step arrays must have length H");
    if (std::abs(initial_dist.sum() - 1.0) > 1e-12 || initial_dist.minCoeff() < 0.0)
        throw std::invalid_argument("MDP: initial distribution invalid");
    const int half_rank = rank_param / 2;
    for (int t = 0; t < horizon; ++t) {
        const Matrix& kernel = kernels[static_cast<std::size_t>(t)];
        if (kernel.rows() != S * A || kernel.cols() != S)
            throw std::invalid_argument("MDP: kernel shape mismatch");
        for (Eigen::Index sa = 0; sa < S * A; ++sa) {
            if (kernel.row(sa).minCoeff() < -1e-12)
                throw std::invalid_argument("MDP: negative transition probability");
            if (std::abs(kernel.row(sa).sum() - 1.0) > 1e-9)
                throw std::invalid_argument("MDP: transition row does not sum to 1");
        }
        const Matrix rebuilt = reconstruct_kernel(factors[static_cast<std::size_t>(t)], S, A);
        if ((rebuilt - kernel).cwiseAbs().maxCoeff() > 1e-9)
            throw std::invalid_argument("MDP: factors do not reconstruct the kernel");
        const Matrix& r = rewards[static_cast<std::size_t>(t)];
        if (r.rows() != S || r.cols() != A) throw std::invalid_argument("MDP: reward shape mismatch");
        if (r.minCoeff() < 0.0 || r.maxCoeff() > 1.0)
            throw std::invalid_argument("MDP: rewards outside [0, 1]");
        if (numerical_rank(r) > half_rank)
            throw std::invalid_argument("MDP: reward rank exceeds floor(d/2)");
    }
}

void Policy::validate() const {
    for (const Matrix& step : per_step) {
        for (Eigen::Index s = 0; s < step.rows(); ++s) {
            if (step.row(s).minCoeff() < 0.0)
                throw std::invalid_argument("Policy: negative probability");
            if (std::abs(step.row(s).sum() - 1.0) > 1e-12)
                throw std::invalid_argument("Policy: row does not sum to 1");
        }
    }
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

namespace {

Vector random_distribution(SplitMix64& rng, Eigen::Index n, double lo = 0.1, double hi = 1.0) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.uniform(lo, hi);
    v /= v.sum();
    return v;
}

// Columns of the returned S x k matrix are mixture weights over k components,
// i.e. each ROW sums to one.
Matrix random_mixture_rows(SplitMix64& rng, Eigen::Index rows, int k) {
    Matrix m(rows, k);
    for (Eigen::Index i = 0; i < rows; ++i) {
        double sum = 0.0;
        for (int j = 0; j < k; ++j) {
            m(i, j) = rng.uniform(0.1, 1.0);
            sum += m(i, j);
        }
        m.row(i) /= sum;
    }
    return m;
}

Matrix random_low_rank_reward(SplitMix64& rng, Eigen::Index S, Eigen::Index A, int half_rank) {
    Matrix r = Matrix::Zero(S, A);
    for (int i = 0; i < half_rank; ++i) {
        Vector x(S), y(A);
        for (Eigen::Index s = 0; s < S; ++s) x(s) = rng.next_double();
        for (Eigen::Index a = 0; a < A; ++a) y(a) = rng.next_double();
        r += x * y.transpose();
    }
    const double peak = r.maxCoeff();
    if (peak > 0.0) r /= peak;  // nonnegative factor products: scaling keeps the rank
    return r;
}

TransitionFactors random_form_i(SplitMix64& rng, Eigen::Index S, Eigen::Index A, int half_rank) {
    FormIFactors f;
    Matrix mix = random_mixture_rows(rng, A, half_rank);
    for (int i = 0; i < half_rank; ++i) {
        Matrix u(S, S);  // column s is a distribution over s'
        for (Eigen::Index s = 0; s < S; ++s) u.col(s) = random_distribution(rng, S);
        f.next_given_state.push_back(std::move(u));
        f.action_weight.push_back(mix.col(i));
    }
    return f;
}

TransitionFactors random_form_ii(SplitMix64& rng, Eigen::Index S, Eigen::Index A, int half_rank) {
    FormIIFactors f;
    Matrix mix = random_mixture_rows(rng, S, half_rank);
    for (int i = 0; i < half_rank; ++i) {
        Matrix w(S, A);  // column a is a distribution over s'
        for (Eigen::Index a = 0; a < A; ++a) w.col(a) = random_distribution(rng, S);
        f.state_weight.push_back(mix.col(i));
        f.next_given_action.push_back(std::move(w));
    }
    return f;
}

// Fully factorized kernels need the component weights v_i(s) * w_i(a) to sum
// to one across i for every (s, a). With one component the weights are
// constant; with two, the mixture can depend on the state or the action but
// not both; with three, the split lambda(s)*omega(a), lambda(s)*(1-omega(a)),
// (1-lambda(s)) gives genuine dependence on both coordinates.
TransitionFactors random_full(SplitMix64& rng, Eigen::Index S, Eigen::Index A, int half_rank) {
    FullFactors f;
    auto lambda_vec = [&](Eigen::Index n) {
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.uniform(0.1, 0.9);
        return v;
    };
    if (half_rank == 1) {
        f.next_state.push_back(random_distribution(rng, S));
        f.state_weight.push_back(Vector::Ones(S));
        f.action_weight.push_back(Vector::Ones(A));
    } else if (half_rank == 2) {
        const bool state_side = (rng.next_u64() & 1u) != 0;
        Vector lam = lambda_vec(state_side ? S : A);
        for (int i = 0; i < 2; ++i) {
            f.next_state.push_back(random_distribution(rng, S));
            Vector weight = (i == 0) ? lam : Vector(Vector::Ones(lam.size()) - lam);
            if (state_side) {
                f.state_weight.push_back(weight);
                f.action_weight.push_back(Vector::Ones(A));
            } else {
                f.state_weight.push_back(Vector::Ones(S));
                f.action_weight.push_back(weight);
            }
        }
    } else {
        Vector lam = lambda_vec(S), omega = lambda_vec(A);
        f.next_state.push_back(random_distribution(rng, S));
        f.state_weight.push_back(lam);
        f.action_weight.push_back(omega);
        f.next_state.push_back(random_distribution(rng, S));
        f.state_weight.push_back(lam);
        f.action_weight.push_back(Vector(Vector::Ones(A) - omega));
        f.next_state.push_back(random_distribution(rng, S));
        f.state_weight.push_back(Vector(Vector::Ones(S) - lam));
        f.action_weight.push_back(Vector::Ones(A));
    }
    return f;
}

TransitionFactors uniform_factors(Eigen::Index S, Eigen::Index A) {
    FullFactors f;
    f.next_state.push_back(Vector::Constant(S, 1.0 / static_cast<double>(S)));
    f.state_weight.push_back(Vector::Ones(S));
    f.action_weight.push_back(Vector::Ones(A));
    return f;
}

}  // namespace

LowRankMDP random_low_rank_mdp(int S, int A, int H, int d, std::uint64_t seed,
                               FactorizationForm form) {
    if (S < 1 || A < 1 || H < 1) throw std::invalid_argument("dimensions must be positive");
    if (d < 2 || d > 2 * std::min(S, A))
        throw std::invalid_argument("rank parameter must satisfy 2 <= d <= 2*min(S,A)");
    const int half_rank = d / 2;
    LowRankMDP mdp;
    mdp.num_states = S;
    mdp.num_actions = A;
    mdp.horizon = H;
    mdp.rank_param = d;
    mdp.form = form;

    SplitMix64 rng(SplitMix64::derive(seed, 0x4d4450ULL));  // instance stream
    for (int t = 0; t < H; ++t) {
        switch (form) {
            case FactorizationForm::kFormI:
                mdp.factors.push_back(random_form_i(rng, S, A, half_rank));
                break;
            case FactorizationForm::kFormII:
                mdp.factors.push_back(random_form_ii(rng, S, A, half_rank));
                break;
            case FactorizationForm::kFullyFactorized:
                mdp.factors.push_back(random_full(rng, S, A, half_rank));
                break;
            case FactorizationForm::kUniform:
                mdp.factors.push_back(uniform_factors(S, A));
                break;
        }
        mdp.kernels.push_back(reconstruct_kernel(mdp.factors.back(), S, A));
        mdp.rewards.push_back(random_low_rank_reward(rng, S, A, half_rank));
    }
    mdp.initial_dist = (form == FactorizationForm::kUniform)
                           ? Vector::Constant(S, 1.0 / static_cast<double>(S))
                           : random_distribution(rng, S);
    return mdp;
}

LowRankMDP uniform_mdp(int S, int A, int H, int d, std::uint64_t seed) {
    return random_low_rank_mdp(S, A, H, d, seed, FactorizationForm::kUniform);
}

Policy uniform_policy(int S, int A, int H) {
    Policy p;
    p.per_step.assign(static_cast<std::size_t>(H),
                      Matrix::Constant(S, A, 1.0 / static_cast<double>(A)));
    return p;
}

Policy random_policy(int S, int A, int H, std::uint64_t seed) {
    SplitMix64 rng(SplitMix64::derive(seed, 0x504f4cULL));
    Policy p;
    for (int t = 0; t < H; ++t) {
        Matrix step(S, A);
        for (Eigen::Index s = 0; s < S; ++s)
            step.row(s) = random_distribution(rng, A, 0.05, 1.0).transpose();
        p.per_step.push_back(std::move(step));
    }
    return p;
}

Policy random_supported_policy(int S, int A, int H, int m, std::uint64_t seed) {
    if (m < 1 || m > A) throw std::invalid_argument("support size must lie in [1, A]");
    SplitMix64 rng(SplitMix64::derive(seed, 0x535550ULL));
    Policy p;
    std::vector<int> actions(static_cast<std::size_t>(A));
    for (int t = 0; t < H; ++t) {
        Matrix step = Matrix::Zero(S, A);
        for (Eigen::Index s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) actions[static_cast<std::size_t>(a)] = a;
            // Partial Fisher-Yates: the first m slots become the support.
            for (int i = 0; i < m; ++i) {
                const int j = i + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(A - i)));
                std::swap(actions[static_cast<std::size_t>(i)], actions[static_cast<std::size_t>(j)]);
                step(s, actions[static_cast<std::size_t>(i)]) = 1.0 / static_cast<double>(m);
            }
        }
        p.per_step.push_back(std::move(step));
    }
    return p;
}

// ---------------------------------------------------------------------------
// Exact oracles
// ---------------------------------------------------------------------------

OccupancyMeasure occupancy_measures(const LowRankMDP& mdp, const Policy& policy) {
    const Eigen::Index S = mdp.num_states;
    if (policy.horizon() != mdp.horizon) throw std::invalid_argument("horizon mismatch");
    OccupancyMeasure occ;
    Vector mu = mdp.initial_dist;
    for (int t = 0; t < mdp.horizon; ++t) {
        occ.state_only.push_back(mu);
        Matrix d = policy.step(t);
        for (Eigen::Index s = 0; s < S; ++s) d.row(s) *= mu(s);
        if (t + 1 < mdp.horizon)
            mu = mdp.kernels[static_cast<std::size_t>(t)].transpose() * flatten_sa(d);
        occ.state_action.push_back(std::move(d));
    }
    return occ;
}

std::vector<Matrix> exact_q_values(const LowRankMDP& mdp, const Policy& policy) {
    const Eigen::Index S = mdp.num_states, A = mdp.num_actions;
    if (policy.horizon() != mdp.horizon) throw std::invalid_argument("horizon mismatch");
    std::vector<Matrix> q(static_cast<std::size_t>(mdp.horizon));
    Matrix next = Matrix::Zero(S, A);
    for (int t = mdp.horizon - 1; t >= 0; --t) {
        Matrix backup = mdp.rewards[static_cast<std::size_t>(t)];
        if (t + 1 < mdp.horizon) {
            const Vector value = (policy.step(t + 1).array() * next.array()).rowwise().sum();
            backup += unflatten_sa(mdp.kernels[static_cast<std::size_t>(t)] * value, S, A);
        }
        q[static_cast<std::size_t>(t)] = backup;
        next = backup;
    }
    return q;
}

double exact_return(const LowRankMDP& mdp, const Policy& policy) {
    const std::vector<Matrix> q = exact_q_values(mdp, policy);
    const OccupancyMeasure occ = occupancy_measures(mdp, policy);
    const double via_q = (occ.state_action[0].array() * q[0].array()).sum();
    double via_occupancy = 0.0;
    for (int t = 0; t < mdp.horizon; ++t)
        via_occupancy +=
            (occ.state_action[static_cast<std::size_t>(t)].array() *
             mdp.rewards[static_cast<std::size_t>(t)].array())
                .sum();
    if (std::abs(via_q - via_occupancy) > 1e-10) {
        std::ostringstream msg;
        msg << "exact_return: Q-route and occupancy-route disagree: " << via_q << " vs "
            << via_occupancy;
        throw std::logic_error(msg.str());
    }
    return via_q;
}

MaskedMatrix bellman_apply(const KernelSlice& kernel, const Matrix& reward,
                           const Matrix& next_policy, const Matrix& f,
                           const std::optional<Mask>& support) {
    const Eigen::Index S = reward.rows(), A = reward.cols();
    if (!f.allFinite()) throw std::invalid_argument("bellman_apply: f has non-finite entries");
    MaskedMatrix out = MaskedMatrix::undefined(S, A);
    const bool zero_continuation = f.isZero(0.0);
    Vector value;
    if (!zero_continuation) value = (next_policy.array() * f.array()).rowwise().sum();
    for (Eigen::Index s = 0; s < S; ++s) {
        for (Eigen::Index a = 0; a < A; ++a) {
            if (support && !(*support)(s, a)) continue;
            double x = reward(s, a);
            if (!zero_continuation) {
                const Eigen::Index sa = sa_index(s, a, A);
                if (!kernel.is_defined(sa))
                    throw OffSupportError("bellman_apply: empirical kernel undefined at requested pair");
                x += kernel.probs->row(sa).dot(value);
            }
            out.values(s, a) = x;
            out.defined(s, a) = true;
        }
    }
    return out;
}

}  // namespace lowrank
