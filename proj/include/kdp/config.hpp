#pragma once

#include <map>
#include <string>
#include <vector>

#include "kdp/types.hpp"

namespace kdp {

// Flat dotted-key configuration ("section.key = value" lines, '#'
// comments). Every key has a documented default; unknown keys are
// rejected by name and all values are range-checked at load time.
class RunConfig {
 public:
  RunConfig();  // defaults only

  static RunConfig load(const std::string& path);

  // Throws std::invalid_argument for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);

  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  const std::string& get_string(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  // Comma-separated numeric list.
  std::vector<double> get_list(const std::string& key) const;

  // Cross-field invariants, checked after load.
  void validate() const;

  // key -> (default, description), for --help-config style output.
  static const std::map<std::string, std::pair<std::string, std::string>>&
  schema();

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace kdp
