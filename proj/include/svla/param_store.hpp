#pragma once

#include <Eigen/Dense>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace svla {

// The four trainable partitions: the semantic backbone, the action head
// (fusion + predictor), the spatial encoder, and the lightweight adapter
// bridging spatial features into the backbone feature space.
enum class ParamGroup { vlm, action_head, spatial, adapter };

std::string to_string(ParamGroup g);
ParamGroup param_group_from_string(const std::string& s);  // throws on unknown

struct ParamEntry {
  Eigen::MatrixXd value;
  ParamGroup group = ParamGroup::vlm;
};

// Named parameter tensors, each carrying exactly one partition tag.
// std::map keeps iteration order deterministic (lexicographic by name).
struct ParameterStore {
  std::map<std::string, ParamEntry> entries;

  bool has(const std::string& name) const { return entries.count(name) > 0; }

  Eigen::MatrixXd& at(const std::string& name);
  const Eigen::MatrixXd& at(const std::string& name) const;
  ParamGroup group_of(const std::string& name) const;

  // throws std::invalid_argument on duplicate name
  void add(const std::string& name, Eigen::MatrixXd value, ParamGroup group);

  std::vector<std::string> names() const;
  std::vector<std::string> names_in(const std::set<ParamGroup>& groups) const;
  long long total_parameters() const;

  // copies every entry of `other` into this store; duplicate names throw.
  void merge(const ParameterStore& other);
};

// Returns the sub-store whose tags lie in `groups`. Empty group set throws.
ParameterStore partition_parameters(const ParameterStore& store,
                                    const std::set<ParamGroup>& groups);

}  // namespace svla
