#include "lowrank/experiments.hpp"
#include "lowrank/improvement.hpp"
#include "lowrank/io.hpp"
#include "lowrank/norms.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace lowrank;

struct MEFlags {
    MEConfig config;
    void attach(CLI::App* app) {
        app->add_option("--me-tol", config.feas_tol, "ME feasibility tolerance");
        app->add_option("--me-max-iters", config.max_iters, "ME iterations per probe");
        app->add_option("--me-restarts", config.restarts, "ME random restarts");
        app->add_option("--me-factor-rank", config.factor_rank, "ME factor rank (0 = min(S,A))");
        app->add_option("--me-bisect-tol", config.bisect_tol_rel,
                        "ME budget bisection tolerance (relative to L)");
    }
};

struct DisFlags {
    DiscrepancyConfig config;
    void attach(CLI::App* app) {
        app->add_option("--dis-max-iters", config.max_iters, "discrepancy iterations per stage");
        app->add_option("--dis-step0", config.step0, "discrepancy initial step size");
        app->add_option("--dis-restarts", config.random_restarts, "discrepancy random restarts");
    }
};

void write_output(const std::string& path, const std::string& contents) {
    if (path.empty() || path == "-") {
        std::cout << contents;
        if (!contents.empty() && contents.back() != '\n') std::cout << "\n";
    } else {
        write_text_file(path, contents);
    }
}

int run_gen_mdp(int S, int A, int H, int d, std::uint64_t seed, const std::string& form,
                const std::string& out) {
    const LowRankMDP mdp = random_low_rank_mdp(S, A, H, d, seed, factorization_form_from_string(form));
    mdp.validate();
    write_output(out, mdp_to_json(mdp).dump(2));
    return 0;
}

int run_gen_policy(int S, int A, int H, std::uint64_t seed, int support, bool uniform,
                   const std::string& out) {
    Policy p;
    if (uniform)
        p = uniform_policy(S, A, H);
    else if (support > 0)
        p = random_supported_policy(S, A, H, support, seed);
    else
        p = random_policy(S, A, H, seed);
    write_output(out, policy_to_json(p).dump(2));
    return 0;
}

int run_sample(const std::string& mdp_path, const std::string& behavior_path, int K,
               std::uint64_t seed, const std::string& out) {
    const LowRankMDP mdp = load_mdp(mdp_path);
    const Policy behavior = load_policy(behavior_path);
    const OfflineDataset data = sample_trajectories(mdp, behavior, K, seed);
    std::ostringstream ss;
    write_dataset(ss, data);
    write_output(out, ss.str());
    return 0;
}

int run_discrepancy(const std::string& p_path, const std::string& q_path, bool policy_mode,
                    const DiscrepancyConfig& config, const std::string& out) {
    const Matrix p = load_matrix(p_path);
    const Matrix q = load_matrix(q_path);
    const DiscrepancyResult result =
        policy_mode ? policy_operator_discrepancy(p, q, config) : operator_discrepancy(p, q, config);
    Json j;
    j["value"] = result.value;
    j["empirical_value"] = policy_mode ? operator_norm(p - q) : empirical_operator_discrepancy(p, q);
    j["minimizer"] = matrix_to_json(result.minimizer);
    j["certificate_gap"] = result.certificate_gap;
    j["iterations"] = result.iterations;
    j["converged"] = result.converged;
    write_output(out, j.dump(2));
    return 0;
}

int run_evaluate(const std::string& mode, const std::string& mdp_path,
                 const std::string& dataset_path, const std::string& target_path,
                 const std::string& behavior_path, const std::string& slack_mode, double delta,
                 double slack_c, int rank_param, double bound_c, const MEConfig& me,
                 const DisFlags& dis, const std::string& out) {
    const Policy target = load_policy(target_path);
    LowRankMDP mdp;
    bool have_mdp = false;
    if (!mdp_path.empty()) {
        mdp = load_mdp(mdp_path);
        have_mdp = true;
    }
    Policy behavior;
    bool have_behavior = false;
    if (!behavior_path.empty()) {
        behavior = load_policy(behavior_path);
        have_behavior = true;
    }

    OPERun run;
    int K = 0;
    if (mode == "infinite") {
        if (!have_mdp || !have_behavior)
            throw std::runtime_error("evaluate --mode infinite requires --mdp and --behavior");
        run = evaluate_policy_infinite(mdp, behavior, target, me);
    } else if (mode == "finite") {
        if (dataset_path.empty()) throw std::runtime_error("evaluate --mode finite requires --dataset");
        const OfflineDataset data = load_dataset(dataset_path);
        K = data.num_trajectories();
        SlackConfig slack;
        slack.delta = delta;
        slack.scale_c = slack_c;
        slack.rank_param = rank_param;
        if (slack_mode == "oracle") {
            if (!have_mdp) throw std::runtime_error("--slack oracle requires --mdp");
            slack.mode = SlackConfig::Mode::kOracle;
            slack.oracle_mdp = &mdp;
        } else {
            slack.mode = SlackConfig::Mode::kPlugin;
        }
        Vector mu1;
        if (have_mdp) {
            mu1 = mdp.initial_dist;
        } else {
            mu1 = Vector::Zero(data.num_states);
            for (const auto& traj : data.trajectories) mu1(traj[0].state) += 1.0;
            mu1 /= mu1.sum();
        }
        run = evaluate_policy_finite(data, target, mu1, me, slack);
    } else {
        throw std::runtime_error("evaluate: --mode must be infinite or finite");
    }

    Json j = run_to_json(run);
    if (have_mdp && have_behavior) {
        const BoundBreakdown inf_bound = bound_infinite(mdp, behavior, target, dis.config);
        Json bi;
        bi["total"] = inf_bound.total;
        bi["per_step_dis"] = inf_bound.per_step;
        j["bound_infinite"] = bi;
        const BoundBreakdown fin_bound =
            bound_finite(mdp, behavior, target, std::max(K, 1), delta, bound_c);
        Json bf;
        bf["total"] = fin_bound.total;
        bf["per_step_emp_dis"] = fin_bound.per_step;
        bf["statistical_term"] = fin_bound.statistical_term;
        bf["regime_exceeded"] = fin_bound.regime_exceeded;
        j["bound_finite"] = bf;
        j["exact_return_target"] = exact_return(mdp, target);
    }
    write_output(out, j.dump(2));
    return 0;
}

int run_optimize(const std::string& dataset_path, const std::string& behavior_path,
                 const std::string& budget_csv, int n_candidates, std::uint64_t seed,
                 int rank_param, double delta, double bound_c, const MEConfig& me,
                 const std::string& mdp_path, const std::string& out) {
    const OfflineDataset data = load_dataset(dataset_path);
    const Policy behavior = load_policy(behavior_path);
    std::vector<double> budgets;
    std::stringstream ss(budget_csv);
    std::string token;
    while (std::getline(ss, token, ',')) budgets.push_back(std::stod(token));
    if (static_cast<int>(budgets.size()) == 1 && behavior.horizon() > 1)
        budgets.assign(static_cast<std::size_t>(behavior.horizon()), budgets[0]);

    const CandidateSet cands =
        build_candidate_set(behavior, budgets, rank_param, data.num_states, data.num_actions,
                            n_candidates, seed);
    SlackConfig slack;
    slack.delta = delta;
    slack.rank_param = rank_param;
    LowRankMDP mdp;
    if (!mdp_path.empty()) {
        mdp = load_mdp(mdp_path);
        slack.mode = SlackConfig::Mode::kOracle;
        slack.oracle_mdp = &mdp;
    }
    const OptimizeResult result = optimize_policy(data, cands, me, slack);

    Json j;
    j["selected_index"] = result.best_index;
    j["selected_policy"] = policy_to_json(result.best);
    j["estimates"] = result.estimates;
    j["suboptimality_bound"] = suboptimality_bound(cands, data.num_trajectories(), delta, bound_c);
    j["step_budgets"] = cands.step_budgets;
    Json norms = Json::array();
    for (const auto& per_step : cands.constraint_norms) norms.push_back(per_step);
    j["constraint_norms"] = std::move(norms);
    write_output(out, j.dump(2));
    return 0;
}

int run_experiment_cmd(const std::string& config_path, const std::string& out, bool check) {
    const ExperimentConfig config =
        experiment_config_from_json(Json::parse(read_text_file(config_path)));
    const ExperimentResult result = run_experiment(config);
    if (out.empty() || out == "-") {
        write_csv(std::cout, config, result);
    } else {
        std::ofstream f(out);
        if (!f) throw std::runtime_error("cannot write " + out);
        write_csv(f, config, result);
    }
    std::cerr << result.check_summary << "\n";
    if (check && result.check_violations > 0) {
        std::cerr << "experiment check failed with " << result.check_violations << " violations\n";
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Offline policy evaluation and improvement for low-rank finite-horizon MDPs"};
    app.require_subcommand(1);

    // gen-mdp
    auto* gen_mdp = app.add_subcommand("gen-mdp", "Generate a random low-rank MDP as JSON");
    int gm_s = 5, gm_a = 5, gm_h = 3, gm_d = 2;
    std::uint64_t gm_seed = 1;
    std::string gm_form = "fully_factorized", gm_out;
    gen_mdp->add_option("--states", gm_s);
    gen_mdp->add_option("--actions", gm_a);
    gen_mdp->add_option("--horizon", gm_h);
    gen_mdp->add_option("--rank", gm_d);
    gen_mdp->add_option("--seed", gm_seed);
    gen_mdp->add_option("--form", gm_form, "form_i | form_ii | fully_factorized | uniform");
    gen_mdp->add_option("--out", gm_out);

    // gen-policy
    auto* gen_policy = app.add_subcommand("gen-policy", "Generate a policy as JSON");
    int gp_s = 5, gp_a = 5, gp_h = 3, gp_support = 0;
    std::uint64_t gp_seed = 1;
    bool gp_uniform = false;
    std::string gp_out;
    gen_policy->add_option("--states", gp_s);
    gen_policy->add_option("--actions", gp_a);
    gen_policy->add_option("--horizon", gp_h);
    gen_policy->add_option("--seed", gp_seed);
    gen_policy->add_option("--support", gp_support, "actions per state (0 = full support)");
    gen_policy->add_flag("--uniform", gp_uniform);
    gen_policy->add_option("--out", gp_out);

    // sample
    auto* sample = app.add_subcommand("sample", "Sample an offline dataset from an MDP");
    std::string sm_mdp, sm_behavior, sm_out;
    int sm_k = 1000;
    std::uint64_t sm_seed = 1;
    sample->add_option("--mdp", sm_mdp)->required();
    sample->add_option("--behavior", sm_behavior)->required();
    sample->add_option("--k", sm_k);
    sample->add_option("--seed", sm_seed);
    sample->add_option("--out", sm_out);

    // discrepancy
    auto* disc = app.add_subcommand("discrepancy", "Operator discrepancy between two distributions");
    std::string dc_p, dc_q, dc_out;
    bool dc_policy = false;
    DisFlags dc_flags;
    disc->add_option("--p", dc_p, "behavior-side distribution or policy step (JSON matrix)")->required();
    disc->add_option("--q", dc_q, "target-side distribution or policy step (JSON matrix)")->required();
    disc->add_flag("--policy", dc_policy, "row-stochastic inputs: per-row support constraints");
    dc_flags.attach(disc);
    disc->add_option("--out", dc_out);

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "Off-policy evaluation (backward Q + completion)");
    std::string ev_mode = "infinite", ev_mdp, ev_dataset, ev_target, ev_behavior, ev_out;
    std::string ev_slack = "plugin";
    double ev_delta = 0.05, ev_slack_c = 1.0, ev_bound_c = 1.0;
    int ev_rank = 0;
    MEFlags ev_me;
    DisFlags ev_dis;
    eval->add_option("--mode", ev_mode, "infinite | finite");
    eval->add_option("--mdp", ev_mdp, "oracle MDP JSON (infinite mode, oracle slack, bounds)");
    eval->add_option("--dataset", ev_dataset, "offline dataset (finite mode)");
    eval->add_option("--target", ev_target)->required();
    eval->add_option("--behavior", ev_behavior, "behavior policy (infinite mode, bounds)");
    eval->add_option("--slack", ev_slack, "oracle | plugin");
    eval->add_option("--delta", ev_delta);
    eval->add_option("--slack-c", ev_slack_c, "plugin slack scale");
    eval->add_option("--rank-param", ev_rank, "rank parameter d when no MDP is supplied");
    eval->add_option("--bound-c", ev_bound_c, "constant C in the finite-sample bound");
    ev_me.attach(eval);
    ev_dis.attach(eval);
    eval->add_option("--out", ev_out);

    // optimize
    auto* opt = app.add_subcommand("optimize", "Constrained policy improvement over a candidate set");
    std::string op_dataset, op_behavior, op_budget = "0.1", op_mdp, op_out;
    int op_n = 10, op_rank = 2;
    std::uint64_t op_seed = 1;
    double op_delta = 0.05, op_bound_c = 1.0;
    MEFlags op_me;
    opt->add_option("--dataset", op_dataset)->required();
    opt->add_option("--behavior", op_behavior)->required();
    opt->add_option("--budget", op_budget, "comma-separated B_1,...,B_H (single value broadcasts)");
    opt->add_option("--n-candidates", op_n);
    opt->add_option("--seed", op_seed);
    opt->add_option("--rank-param", op_rank);
    opt->add_option("--delta", op_delta);
    opt->add_option("--bound-c", op_bound_c);
    opt->add_option("--mdp", op_mdp, "oracle MDP for the inner-product slack");
    op_me.attach(opt);
    opt->add_option("--out", op_out);

    // experiment
    auto* exp = app.add_subcommand("experiment", "Seeded batch experiments emitting CSV");
    std::string ex_config, ex_out;
    bool ex_check = false, ex_list = false;
    exp->add_option("--config", ex_config, "experiment config JSON");
    exp->add_option("--out", ex_out, "output CSV path (default stdout)");
    exp->add_flag("--check", ex_check, "exit nonzero on invariant violations");
    exp->add_flag("--list", ex_list, "list available experiment kinds");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen_mdp->parsed())
            return run_gen_mdp(gm_s, gm_a, gm_h, gm_d, gm_seed, gm_form, gm_out);
        if (gen_policy->parsed())
            return run_gen_policy(gp_s, gp_a, gp_h, gp_seed, gp_support, gp_uniform, gp_out);
        if (sample->parsed()) return run_sample(sm_mdp, sm_behavior, sm_k, sm_seed, sm_out);
        if (disc->parsed())
            return run_discrepancy(dc_p, dc_q, dc_policy, dc_flags.config, dc_out);
        if (eval->parsed())
            return run_evaluate(ev_mode, ev_mdp, ev_dataset, ev_target, ev_behavior, ev_slack,
                                ev_delta, ev_slack_c, ev_rank, ev_bound_c, ev_me.config, ev_dis,
                                ev_out);
        if (opt->parsed())
            return run_optimize(op_dataset, op_behavior, op_budget, op_n, op_seed, op_rank,
                                op_delta, op_bound_c, op_me.config, op_mdp, op_out);
        if (exp->parsed()) {
            if (ex_list) {
                for (const std::string& name : lowrank::experiment_kind_names())
                    std::cout << name << "\n";
                return 0;
            }
            if (ex_config.empty()) throw std::runtime_error("experiment requires --config (or --list)");
            return run_experiment_cmd(ex_config, ex_out, ex_check);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
