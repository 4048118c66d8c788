#pragma once

#include "lowrank/evaluation.hpp"
#include "lowrank/mdp.hpp"
#include "lowrank/offline_data.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>

namespace lowrank {

using Json = nlohmann::json;

// Matrices serialize as nested arrays of numbers; doubles round-trip
// bit-exactly through the decimal representation the writer chooses.
Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);

Json mdp_to_json(const LowRankMDP& mdp);
LowRankMDP mdp_from_json(const Json& j);

Json policy_to_json(const Policy& policy);
Policy policy_from_json(const Json& j);

Json run_to_json(const OPERun& run);

/// Dataset format: one '#'-prefixed JSON header line (dims, seed, K), then
/// compact CSV rows "k,t,s,a,r".
void write_dataset(std::ostream& out, const OfflineDataset& dataset);
OfflineDataset read_dataset(std::istream& in);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& contents);

LowRankMDP load_mdp(const std::string& path);
Policy load_policy(const std::string& path);
Matrix load_matrix(const std::string& path);
OfflineDataset load_dataset(const std::string& path);
void save_dataset(const std::string& path, const OfflineDataset& dataset);

}  // namespace lowrank
