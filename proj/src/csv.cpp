#include "kdp/csv.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace kdp {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.precision(17);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  return in;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_double(const std::string& s, const std::string& path, long line) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
      ++pos;
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(path + ": malformed value '" + s +
                                "' at line " + std::to_string(line));
  }
}

}  // namespace

void save_transitions_csv(const std::string& path,
                          const TransitionSample& sample) {
  sample.validate();
  std::ofstream out = open_out(path);
  const Index d = sample.dim();
  for (Index k = 0; k < d; ++k) out << "x_" << k << ",";
  out << "a";
  for (Index k = 0; k < d; ++k) out << ",xp_" << k;
  out << "\n";
  for (Index i = 0; i < sample.size(); ++i) {
    for (Index k = 0; k < d; ++k) out << sample.states(i, k) << ",";
    out << sample.actions[i];
    for (Index k = 0; k < d; ++k) out << "," << sample.next_states(i, k);
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

TransitionSample load_transitions_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) {
    throw std::invalid_argument(path + ": empty file");
  }
  std::vector<std::string> header = split_csv(line);
  if (header.size() < 3 || header.size() % 2 == 0) {
    throw std::invalid_argument(path + ": malformed header at line 1");
  }
  const Index d = static_cast<Index>((header.size() - 1) / 2);

  std::vector<std::vector<double>> rows;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields = split_csv(line);
    if (static_cast<Index>(fields.size()) != 2 * d + 1) {
      throw std::invalid_argument(path + ": wrong field count at line " +
                                  std::to_string(lineno));
    }
    std::vector<double> row(fields.size());
    for (std::size_t k = 0; k < fields.size(); ++k) {
      row[k] = parse_double(fields[k], path, lineno);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw std::invalid_argument(path + ": no data rows");
  }

  TransitionSample sample;
  const Index m = static_cast<Index>(rows.size());
  sample.states.resize(m, d);
  sample.actions.resize(m);
  sample.next_states.resize(m, d);
  for (Index i = 0; i < m; ++i) {
    for (Index k = 0; k < d; ++k) sample.states(i, k) = rows[i][k];
    sample.actions[i] = rows[i][d];
    for (Index k = 0; k < d; ++k) sample.next_states(i, k) = rows[i][d + 1 + k];
  }
  return sample;
}

void save_tabular_mdp(const std::string& transitions_path,
                      const std::string& rewards_path, const TabularMDP& mdp) {
  mdp.validate();
  {
    std::ofstream out = open_out(transitions_path);
    out << "a,x,xp,prob\n";
    for (Index a = 0; a < mdp.num_actions(); ++a) {
      for (Index x = 0; x < mdp.num_states(); ++x) {
        for (Index xp = 0; xp < mdp.num_states(); ++xp) {
          double p = mdp.transitions[a](x, xp);
          if (p != 0.0) out << a << "," << x << "," << xp << "," << p << "\n";
        }
      }
    }
    if (!out) throw IoError("write failed: " + transitions_path);
  }
  std::ofstream out = open_out(rewards_path);
  out << "x,a,r\n";
  for (Index x = 0; x < mdp.num_states(); ++x) {
    for (Index a = 0; a < mdp.num_actions(); ++a) {
      out << x << "," << a << "," << mdp.rewards(x, a) << "\n";
    }
  }
  if (!out) throw IoError("write failed: " + rewards_path);
}

TabularMDP load_tabular_mdp(const std::string& transitions_path,
                            const std::string& rewards_path, double gamma) {
  struct Entry {
    long a, x, xp;
    double p;
  };
  std::vector<Entry> entries;
  long max_state = -1, max_action = -1;
  {
    std::ifstream in = open_in(transitions_path);
    std::string line;
    std::getline(in, line);  // header
    long lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::vector<std::string> f = split_csv(line);
      if (f.size() != 4) {
        throw std::invalid_argument(transitions_path +
                                    ": wrong field count at line " +
                                    std::to_string(lineno));
      }
      Entry e;
      e.a = std::lround(parse_double(f[0], transitions_path, lineno));
      e.x = std::lround(parse_double(f[1], transitions_path, lineno));
      e.xp = std::lround(parse_double(f[2], transitions_path, lineno));
      e.p = parse_double(f[3], transitions_path, lineno);
      entries.push_back(e);
      max_state = std::max({max_state, e.x, e.xp});
      max_action = std::max(max_action, e.a);
    }
  }
  if (entries.empty()) {
    throw std::invalid_argument(transitions_path + ": no transitions");
  }

  TabularMDP mdp;
  mdp.gamma = gamma;
  const Index n = max_state + 1;
  const Index na = max_action + 1;
  mdp.transitions.assign(na, Mat::Zero(n, n));
  mdp.rewards = Mat::Zero(n, na);
  for (const Entry& e : entries) {
    mdp.transitions[e.a](e.x, e.xp) += e.p;
  }

  std::ifstream in = open_in(rewards_path);
  std::string line;
  std::getline(in, line);
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f = split_csv(line);
    if (f.size() != 3) {
      throw std::invalid_argument(rewards_path + ": wrong field count at line " +
                                  std::to_string(lineno));
    }
    long x = std::lround(parse_double(f[0], rewards_path, lineno));
    long a = std::lround(parse_double(f[1], rewards_path, lineno));
    if (x < 0 || x >= n || a < 0 || a >= na) {
      throw std::invalid_argument(rewards_path + ": index out of range at line " +
                                  std::to_string(lineno));
    }
    mdp.rewards(x, a) = parse_double(f[2], rewards_path, lineno);
  }
  mdp.validate();
  return mdp;
}

void save_value_csv(const std::string& path, const Mat& coords,
                    const Vec& values) {
  if (coords.rows() != values.size()) {
    throw std::invalid_argument("save_value_csv: size mismatch");
  }
  std::ofstream out = open_out(path);
  for (Index k = 0; k < coords.cols(); ++k) out << "x_" << k << ",";
  out << "value\n";
  for (Index i = 0; i < coords.rows(); ++i) {
    for (Index k = 0; k < coords.cols(); ++k) out << coords(i, k) << ",";
    out << values[i] << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

void save_policy_csv(const std::string& path, const Mat& coords,
                     const Eigen::VectorXi& actions) {
  if (coords.rows() != actions.size()) {
    throw std::invalid_argument("save_policy_csv: size mismatch");
  }
  std::ofstream out = open_out(path);
  for (Index k = 0; k < coords.cols(); ++k) out << "x_" << k << ",";
  out << "action\n";
  for (Index i = 0; i < coords.rows(); ++i) {
    for (Index k = 0; k < coords.cols(); ++k) out << coords(i, k) << ",";
    out << actions[i] << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

std::pair<Mat, Vec> load_coord_value_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) {
    throw std::invalid_argument(path + ": empty file");
  }
  const std::size_t ncols = split_csv(line).size();
  if (ncols < 2) {
    throw std::invalid_argument(path + ": malformed header at line 1");
  }
  std::vector<std::vector<double>> rows;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f = split_csv(line);
    if (f.size() != ncols) {
      throw std::invalid_argument(path + ": wrong field count at line " +
                                  std::to_string(lineno));
    }
    std::vector<double> row(ncols);
    for (std::size_t k = 0; k < ncols; ++k) {
      row[k] = parse_double(f[k], path, lineno);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument(path + ": no data rows");
  Mat coords(Index(rows.size()), Index(ncols - 1));
  Vec last(Index(rows.size()));
  for (Index i = 0; i < coords.rows(); ++i) {
    for (Index k = 0; k + 1 < Index(ncols); ++k) coords(i, k) = rows[i][k];
    last[i] = rows[i][ncols - 1];
  }
  return {coords, last};
}

}  // namespace kdp
