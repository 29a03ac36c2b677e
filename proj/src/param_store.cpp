#include "svla/param_store.hpp"

#include <stdexcept>

namespace svla {

std::string to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::vlm: return "vlm";
    case ParamGroup::action_head: return "action_head";
    case ParamGroup::spatial: return "spatial";
    case ParamGroup::adapter: return "adapter";
  }
  throw std::logic_error("unreachable param group");
}

ParamGroup param_group_from_string(const std::string& s) {
  if (s == "vlm") return ParamGroup::vlm;
  if (s == "action_head") return ParamGroup::action_head;
  if (s == "spatial") return ParamGroup::spatial;
  if (s == "adapter") return ParamGroup::adapter;
  throw std::invalid_argument("unknown parameter group: " + s);
}

Eigen::MatrixXd& ParameterStore::at(const std::string& name) {
  auto it = entries.find(name);
  if (it == entries.end()) {
    throw std::out_of_range("unknown parameter: " + name);
  }
  return it->second.value;
}

const Eigen::MatrixXd& ParameterStore::at(const std::string& name) const {
  auto it = entries.find(name);
  if (it == entries.end()) {
    throw std::out_of_range("unknown parameter: " + name);
  }
  return it->second.value;
}

ParamGroup ParameterStore::group_of(const std::string& name) const {
  auto it = entries.find(name);
  if (it == entries.end()) {
    throw std::out_of_range("unknown parameter: " + name);
  }
  return it->second.group;
}

void ParameterStore::add(const std::string& name, Eigen::MatrixXd value,
                         ParamGroup group) {
  auto [it, inserted] = entries.emplace(name, ParamEntry{std::move(value), group});
  if (!inserted) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& [name, _] : entries) out.push_back(name);
  return out;
}

std::vector<std::string> ParameterStore::names_in(
    const std::set<ParamGroup>& groups) const {
  std::vector<std::string> out;
  for (const auto& [name, entry] : entries) {
    if (groups.count(entry.group)) out.push_back(name);
  }
  return out;
}

long long ParameterStore::total_parameters() const {
  long long n = 0;
  for (const auto& [_, entry] : entries) n += entry.value.size();
  return n;
}

void ParameterStore::merge(const ParameterStore& other) {
  for (const auto& [name, entry] : other.entries) {
    add(name, entry.value, entry.group);
  }
}

ParameterStore partition_parameters(const ParameterStore& store,
                                    const std::set<ParamGroup>& groups) {
  if (groups.empty()) {
    throw std::invalid_argument("partition requires at least one group");
  }
  ParameterStore out;
  for (const auto& [name, entry] : store.entries) {
    if (groups.count(entry.group)) out.add(name, entry.value, entry.group);
  }
  return out;
}

}  // namespace svla
