#include "lowrank/evaluation.hpp"
#include "lowrank/experiments.hpp"
#include "lowrank/improvement.hpp"
#include "lowrank/io.hpp"
#include "lowrank/norms.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace lowrank;

namespace {

SlackConfig make_slack(const std::string& mode, const LowRankMDP* oracle, double scale_c,
                       double delta, int rank_param) {
    SlackConfig slack;
    slack.mode = mode == "oracle" ? SlackConfig::Mode::kOracle : SlackConfig::Mode::kPlugin;
    slack.oracle_mdp = oracle;
    slack.scale_c = scale_c;
    slack.delta = delta;
    slack.rank_param = rank_param;
    return slack;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Offline policy evaluation and improvement for low-rank finite-horizon MDPs";

    py::register_exception<OffSupportError>(m, "OffSupportError");
    py::register_exception<MESolverFailure>(m, "MESolverFailure");

    py::enum_<FactorizationForm>(m, "FactorizationForm")
        .value("FORM_I", FactorizationForm::kFormI)
        .value("FORM_II", FactorizationForm::kFormII)
        .value("FULLY_FACTORIZED", FactorizationForm::kFullyFactorized)
        .value("UNIFORM", FactorizationForm::kUniform);

    py::class_<LowRankMDP>(m, "LowRankMDP")
        .def_readonly("num_states", &LowRankMDP::num_states)
        .def_readonly("num_actions", &LowRankMDP::num_actions)
        .def_readonly("horizon", &LowRankMDP::horizon)
        .def_readonly("rank_param", &LowRankMDP::rank_param)
        .def_readonly("rewards", &LowRankMDP::rewards)
        .def_readonly("kernels", &LowRankMDP::kernels)
        .def_readonly("initial_dist", &LowRankMDP::initial_dist)
        .def("validate", &LowRankMDP::validate)
        .def("to_json", [](const LowRankMDP& mdp) { return mdp_to_json(mdp).dump(); })
        .def_static("from_json", [](const std::string& text) {
            LowRankMDP mdp = mdp_from_json(Json::parse(text));
            mdp.validate();
            return mdp;
        });

    py::class_<Policy>(m, "Policy")
        .def(py::init([](const std::vector<Matrix>& steps) {
            Policy p;
            p.per_step = steps;
            p.validate();
            return p;
        }))
        .def_readonly("per_step", &Policy::per_step)
        .def_property_readonly("horizon", &Policy::horizon)
        .def("to_json", [](const Policy& p) { return policy_to_json(p).dump(); })
        .def_static("from_json", [](const std::string& text) {
            Policy p = policy_from_json(Json::parse(text));
            p.validate();
            return p;
        });

    py::class_<OccupancyMeasure>(m, "OccupancyMeasure")
        .def_readonly("state_action", &OccupancyMeasure::state_action)
        .def_readonly("state_only", &OccupancyMeasure::state_only);

    py::class_<OfflineDataset>(m, "OfflineDataset")
        .def_readonly("seed", &OfflineDataset::seed)
        .def_readonly("num_states", &OfflineDataset::num_states)
        .def_readonly("num_actions", &OfflineDataset::num_actions)
        .def_readonly("horizon", &OfflineDataset::horizon)
        .def_property_readonly("num_trajectories", &OfflineDataset::num_trajectories)
        .def("to_csv",
             [](const OfflineDataset& d) {
                 std::ostringstream ss;
                 write_dataset(ss, d);
                 return ss.str();
             })
        .def_static("from_csv", [](const std::string& text) {
            std::istringstream ss(text);
            return read_dataset(ss);
        });

    py::class_<EmpiricalModel>(m, "EmpiricalModel")
        .def_readonly("counts", &EmpiricalModel::counts)
        .def_readonly("empirical_occupancy", &EmpiricalModel::empirical_occupancy);

    py::class_<MESolution>(m, "MESolution")
        .def_readonly("estimate", &MESolution::estimate)
        .def_readonly("max_norm_value", &MESolution::max_norm_value)
        .def_readonly("constraint_residual", &MESolution::constraint_residual)
        .def_readonly("iterations", &MESolution::iterations)
        .def_readonly("converged", &MESolution::converged);

    py::class_<DiscrepancyResult>(m, "DiscrepancyResult")
        .def_readonly("value", &DiscrepancyResult::value)
        .def_readonly("minimizer", &DiscrepancyResult::minimizer)
        .def_readonly("iterations", &DiscrepancyResult::iterations)
        .def_readonly("converged", &DiscrepancyResult::converged)
        .def_readonly("certificate_gap", &DiscrepancyResult::certificate_gap);

    py::class_<StepDiagnostics>(m, "StepDiagnostics")
        .def_readonly("t", &StepDiagnostics::t)
        .def_readonly("support_size", &StepDiagnostics::support_size)
        .def_readonly("residual", &StepDiagnostics::residual)
        .def_readonly("max_norm_certificate", &StepDiagnostics::max_norm_certificate)
        .def_readonly("cap", &StepDiagnostics::cap)
        .def_readonly("slack", &StepDiagnostics::slack)
        .def_readonly("iterations", &StepDiagnostics::iterations)
        .def_readonly("converged", &StepDiagnostics::converged)
        .def_readonly("emp_discrepancy", &StepDiagnostics::emp_discrepancy);

    py::class_<OPERun>(m, "OPERun")
        .def_readonly("estimate", &OPERun::estimate)
        .def_readonly("q_estimates", &OPERun::q_estimates)
        .def_readonly("diagnostics", &OPERun::diagnostics);

    py::class_<BoundBreakdown>(m, "BoundBreakdown")
        .def_readonly("total", &BoundBreakdown::total)
        .def_readonly("per_step", &BoundBreakdown::per_step)
        .def_readonly("statistical_term", &BoundBreakdown::statistical_term)
        .def_readonly("regime_exceeded", &BoundBreakdown::regime_exceeded);

    py::class_<CandidateSet>(m, "CandidateSet")
        .def_readonly("policies", &CandidateSet::policies)
        .def_readonly("bounds", &CandidateSet::bounds)
        .def_readonly("step_budgets", &CandidateSet::step_budgets)
        .def_readonly("constraint_norms", &CandidateSet::constraint_norms)
        .def_property_readonly("size", &CandidateSet::size);

    py::class_<OptimizeResult>(m, "OptimizeResult")
        .def_readonly("best", &OptimizeResult::best)
        .def_readonly("best_index", &OptimizeResult::best_index)
        .def_readonly("estimates", &OptimizeResult::estimates);

    m.def("random_low_rank_mdp", &random_low_rank_mdp, py::arg("num_states"),
          py::arg("num_actions"), py::arg("horizon"), py::arg("rank_param"), py::arg("seed"),
          py::arg("form") = FactorizationForm::kFullyFactorized);
    m.def("uniform_mdp", &uniform_mdp, py::arg("num_states"), py::arg("num_actions"),
          py::arg("horizon"), py::arg("rank_param"), py::arg("seed"));
    m.def("uniform_policy", &uniform_policy, py::arg("num_states"), py::arg("num_actions"),
          py::arg("horizon"));
    m.def("random_policy", &random_policy, py::arg("num_states"), py::arg("num_actions"),
          py::arg("horizon"), py::arg("seed"));
    m.def("random_supported_policy", &random_supported_policy, py::arg("num_states"),
          py::arg("num_actions"), py::arg("horizon"), py::arg("support_size"), py::arg("seed"));

    m.def("occupancy_measures", &occupancy_measures);
    m.def("exact_q_values", &exact_q_values);
    m.def("exact_return", &exact_return);

    m.def("sample_trajectories", &sample_trajectories, py::arg("mdp"), py::arg("behavior"),
          py::arg("num_trajectories"), py::arg("seed"));
    m.def("empirical_model", &empirical_model);

    m.def("operator_norm", &operator_norm);
    m.def("nuclear_norm", &nuclear_norm);
    m.def("max_norm_bound", [](const Matrix& m_, int rank_hint) {
        const MaxNormBound b = max_norm_bound(m_, rank_hint);
        return py::make_tuple(b.lower, b.upper);
    }, py::arg("matrix"), py::arg("rank_hint") = 0);

    m.def(
        "solve_me",
        [](const Matrix& weights, const Matrix& observed, double entry_bound, int rank_param,
           const std::string& mode, double slack, std::uint64_t seed) {
            MEProblem problem;
            problem.weights = weights;
            problem.observed = observed;
            problem.entry_bound = entry_bound;
            problem.rank_param = rank_param;
            problem.mode = mode == "equality" ? MEMode::kEquality : MEMode::kInnerProduct;
            problem.slack = slack;
            MEConfig config;
            config.seed = seed;
            return solve_me(problem, config);
        },
        py::arg("weights"), py::arg("observed"), py::arg("entry_bound"), py::arg("rank_param"),
        py::arg("mode") = "equality", py::arg("slack") = 0.0, py::arg("seed") = 0);

    m.def(
        "operator_discrepancy",
        [](const Matrix& p, const Matrix& q, std::uint64_t seed) {
            DiscrepancyConfig config;
            config.seed = seed;
            return operator_discrepancy(p, q, config);
        },
        py::arg("p"), py::arg("q"), py::arg("seed") = 0);
    m.def("empirical_operator_discrepancy", &empirical_operator_discrepancy);
    m.def(
        "policy_operator_discrepancy",
        [](const Matrix& behavior, const Matrix& target, std::uint64_t seed) {
            DiscrepancyConfig config;
            config.seed = seed;
            return policy_operator_discrepancy(behavior, target, config);
        },
        py::arg("behavior"), py::arg("target"), py::arg("seed") = 0);
    m.def("concentrability_coefficient", &concentrability_coefficient, py::arg("d_behavior"),
          py::arg("d_target"), py::arg("support_threshold") = 1e-12);

    m.def(
        "evaluate_policy_infinite",
        [](const LowRankMDP& mdp, const Policy& behavior, const Policy& target) {
            return evaluate_policy_infinite(mdp, behavior, target);
        },
        py::arg("mdp"), py::arg("behavior"), py::arg("target"));
    m.def(
        "evaluate_policy_finite",
        [](const OfflineDataset& dataset, const Policy& target, const Vector& initial_dist,
           const std::string& slack_mode, const LowRankMDP* oracle, double scale_c, double delta,
           int rank_param) {
            return evaluate_policy_finite(dataset, target, initial_dist, MEConfig{},
                                          make_slack(slack_mode, oracle, scale_c, delta, rank_param));
        },
        py::arg("dataset"), py::arg("target"), py::arg("initial_dist"),
        py::arg("slack_mode") = "plugin", py::arg("oracle_mdp") = nullptr,
        py::arg("scale_c") = 1.0, py::arg("delta") = 0.05, py::arg("rank_param") = 2,
        py::keep_alive<0, 5>());
    m.def("bound_infinite",
          [](const LowRankMDP& mdp, const Policy& behavior, const Policy& target) {
              return bound_infinite(mdp, behavior, target);
          });
    m.def("bound_finite", &bound_finite, py::arg("mdp"), py::arg("behavior"), py::arg("target"),
          py::arg("num_trajectories"), py::arg("delta") = 0.05, py::arg("constant") = 1.0);

    m.def("build_candidate_set", &build_candidate_set, py::arg("behavior"), py::arg("budgets"),
          py::arg("rank_param"), py::arg("num_states"), py::arg("num_actions"),
          py::arg("n_candidates"), py::arg("seed"));
    m.def(
        "optimize_policy",
        [](const OfflineDataset& dataset, const CandidateSet& candidates,
           const std::string& slack_mode, const LowRankMDP* oracle, double delta) {
            return optimize_policy(dataset, candidates, MEConfig{},
                                   make_slack(slack_mode, oracle, 1.0, delta, candidates.rank_param));
        },
        py::arg("dataset"), py::arg("candidates"), py::arg("slack_mode") = "plugin",
        py::arg("oracle_mdp") = nullptr, py::arg("delta") = 0.05);
    m.def("suboptimality_bound", &suboptimality_bound, py::arg("candidates"),
          py::arg("num_trajectories"), py::arg("delta") = 0.05, py::arg("constant") = 1.0);

    m.def("run_experiment_csv", [](const std::string& config_json) {
        const ExperimentConfig config = experiment_config_from_json(Json::parse(config_json));
        const ExperimentResult result = run_experiment(config);
        return csv_string(config, result);
    });

    m.attr("__version__") = version_string();
}
