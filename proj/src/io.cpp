#include "lowrank/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lowrank {

Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const Json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (rows == 0) return Matrix();
    const auto cols = static_cast<Eigen::Index>(j.at(0).size());
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index c = 0; c < cols; ++c)
            m(i, c) = j.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(c)).get<double>();
    return m;
}

Json vector_to_json(const Vector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Vector vector_from_json(const Json& j) {
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
    return v;
}

namespace {

Json factors_to_json(const TransitionFactors& factors) {
    Json out;
    if (const auto* f = std::get_if<FormIFactors>(&factors)) {
        out["kind"] = "form_i";
        for (const auto& m : f->next_given_state) out["next_given_state"].push_back(matrix_to_json(m));
        for (const auto& v : f->action_weight) out["action_weight"].push_back(vector_to_json(v));
    } else if (const auto* f = std::get_if<FormIIFactors>(&factors)) {
        out["kind"] = "form_ii";
        for (const auto& v : f->state_weight) out["state_weight"].push_back(vector_to_json(v));
        for (const auto& m : f->next_given_action)
            out["next_given_action"].push_back(matrix_to_json(m));
    } else {
        const auto& full = std::get<FullFactors>(factors);
        out["kind"] = "full";
        for (const auto& v : full.next_state) out["next_state"].push_back(vector_to_json(v));
        for (const auto& v : full.state_weight) out["state_weight"].push_back(vector_to_json(v));
        for (const auto& v : full.action_weight) out["action_weight"].push_back(vector_to_json(v));
    }
    return out;
}

TransitionFactors factors_from_json(const Json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "form_i") {
        FormIFactors f;
        for (const auto& m : j.at("next_given_state")) f.next_given_state.push_back(matrix_from_json(m));
        for (const auto& v : j.at("action_weight")) f.action_weight.push_back(vector_from_json(v));
        return f;
    }
    if (kind == "form_ii") {
        FormIIFactors f;
        for (const auto& v : j.at("state_weight")) f.state_weight.push_back(vector_from_json(v));
        for (const auto& m : j.at("next_given_action"))
            f.next_given_action.push_back(matrix_from_json(m));
        return f;
    }
    FullFactors f;
    for (const auto& v : j.at("next_state")) f.next_state.push_back(vector_from_json(v));
    for (const auto& v : j.at("state_weight")) f.state_weight.push_back(vector_from_json(v));
    for (const auto& v : j.at("action_weight")) f.action_weight.push_back(vector_from_json(v));
    return f;
}

}  // namespace

Json mdp_to_json(const LowRankMDP& mdp) {
    Json j;
    j["type"] = "low_rank_mdp";
    j["num_states"] = mdp.num_states;
    j["num_actions"] = mdp.num_actions;
    j["horizon"] = mdp.horizon;
    j["rank_param"] = mdp.rank_param;
    j["factorization_form"] = to_string(mdp.form);
    j["initial_dist"] = vector_to_json(mdp.initial_dist);
    for (const auto& r : mdp.rewards) j["rewards"].push_back(matrix_to_json(r));
    for (const auto& f : mdp.factors) j["factors"].push_back(factors_to_json(f));
    return j;
}

LowRankMDP mdp_from_json(const Json& j) {
    LowRankMDP mdp;
    mdp.num_states = j.at("num_states").get<int>();
    mdp.num_actions = j.at("num_actions").get<int>();
    mdp.horizon = j.at("horizon").get<int>();
    mdp.rank_param = j.at("rank_param").get<int>();
    mdp.form = factorization_form_from_string(j.at("factorization_form").get<std::string>());
    mdp.initial_dist = vector_from_json(j.at("initial_dist"));
    for (const auto& r : j.at("rewards")) mdp.rewards.push_back(matrix_from_json(r));
    for (const auto& f : j.at("factors")) {
        mdp.factors.push_back(factors_from_json(f));
        // Kernels are not serialized; the factors rebuild them bit-exactly.
        mdp.kernels.push_back(
            reconstruct_kernel(mdp.factors.back(), mdp.num_states, mdp.num_actions));
    }
    return mdp;
}

Json policy_to_json(const Policy& policy) {
    Json j;
    j["type"] = "policy";
    j["horizon"] = policy.horizon();
    if (!policy.per_step.empty()) {
        j["num_states"] = static_cast<int>(policy.per_step[0].rows());
        j["num_actions"] = static_cast<int>(policy.per_step[0].cols());
    }
    for (const auto& step : policy.per_step) j["per_step"].push_back(matrix_to_json(step));
    return j;
}

Policy policy_from_json(const Json& j) {
    Policy p;
    for (const auto& step : j.at("per_step")) p.per_step.push_back(matrix_from_json(step));
    return p;
}

Json run_to_json(const OPERun& run) {
    Json j;
    j["estimate"] = run.estimate;
    j["mode"] = run.mode == EvalMode::kInfiniteSample ? "infinite" : "finite";
    Json steps = Json::array();
    for (const auto& d : run.diagnostics) {
        Json s;
        s["t"] = d.t;
        s["support_size"] = d.support_size;
        s["residual"] = d.residual;
        s["max_norm_certificate"] = d.max_norm_certificate;
        s["max_norm_cap"] = d.cap;
        s["slack"] = d.slack;
        s["iterations"] = d.iterations;
        s["converged"] = d.converged;
        if (std::isfinite(d.emp_discrepancy)) s["emp_discrepancy"] = d.emp_discrepancy;
        steps.push_back(std::move(s));
    }
    j["per_step"] = std::move(steps);
    return j;
}

void write_dataset(std::ostream& out, const OfflineDataset& dataset) {
    Json header;
    header["type"] = "offline_dataset";
    header["num_states"] = dataset.num_states;
    header["num_actions"] = dataset.num_actions;
    header["horizon"] = dataset.horizon;
    header["seed"] = dataset.seed;
    header["num_trajectories"] = dataset.num_trajectories();
    out << "# " << header.dump() << "\n";
    out << "k,t,s,a,r\n";
    char buf[64];
    for (int k = 0; k < dataset.num_trajectories(); ++k) {
        const auto& traj = dataset.trajectories[static_cast<std::size_t>(k)];
        for (int t = 0; t < dataset.horizon; ++t) {
            const auto& step = traj[static_cast<std::size_t>(t)];
            std::snprintf(buf, sizeof(buf), "%.17g", step.reward);
            out << k << ',' << (t + 1) << ',' << step.state << ',' << step.action << ',' << buf
                << "\n";
        }
    }
}

OfflineDataset read_dataset(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.size() < 2 || line[0] != '#')
        throw std::runtime_error("dataset: missing JSON header line");
    const Json header = Json::parse(line.substr(1));
    OfflineDataset data;
    data.num_states = header.at("num_states").get<int>();
    data.num_actions = header.at("num_actions").get<int>();
    data.horizon = header.at("horizon").get<int>();
    data.seed = header.at("seed").get<std::uint64_t>();
    const int K = header.at("num_trajectories").get<int>();
    data.trajectories.assign(static_cast<std::size_t>(K),
                             std::vector<Transition>(static_cast<std::size_t>(data.horizon)));
    std::getline(in, line);  // column header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        int k, t, s, a;
        double r;
        if (std::sscanf(line.c_str(), "%d,%d,%d,%d,%lf", &k, &t, &s, &a, &r) != 5)
            throw std::runtime_error("dataset: malformed row: " + line);
        data.trajectories.at(static_cast<std::size_t>(k)).at(static_cast<std::size_t>(t - 1)) =
            Transition{s, a, r};
    }
    return data;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << contents;
}

LowRankMDP load_mdp(const std::string& path) {
    LowRankMDP mdp = mdp_from_json(Json::parse(read_text_file(path)));
    mdp.validate();
    return mdp;
}

Policy load_policy(const std::string& path) {
    Policy p = policy_from_json(Json::parse(read_text_file(path)));
    p.validate();
    return p;
}

Matrix load_matrix(const std::string& path) {
    const Json j = Json::parse(read_text_file(path));
    if (j.is_object() && j.contains("values")) return matrix_from_json(j.at("values"));
    return matrix_from_json(j);
}

OfflineDataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_dataset(in);
}

void save_dataset(const std::string& path, const OfflineDataset& dataset) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_dataset(out, dataset);
}

}  // namespace lowrank
