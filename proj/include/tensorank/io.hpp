#pragma once

// Text formats. Every index in a file is 1-based; everything in memory is
// 0-based, so readers subtract one and writers add one.
//
//   model:   scheme=<d1,...>; optional theta0=<x>; then E=<j..>; levels=<l..>; value=<x>
//   tensor:  scheme=<d1,...>; then cell=<i1,...>; p=<x>   (absent cells are 0)
//   graph:   "j1 j2" per line, or inline "1-2,2-3"
//   data:    CSV with a header row of names and 1-based levels, or the
//            cell-count form i1,...,ip,count (header ending in "count")
//
// '#' starts a comment anywhere on a line.

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tensorank/ctucker.hpp"
#include "tensorank/error.hpp"
#include "tensorank/expansion.hpp"
#include "tensorank/graph.hpp"
#include "tensorank/loglinear.hpp"
#include "tensorank/tensor.hpp"

namespace tensorank {

inline constexpr const char* kToolVersion = "0.1.0";

// ---- small parsing helpers ------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::string strip_comment(const std::string& s) {
  std::size_t h = s.find('#');
  return trim(h == std::string::npos ? s : s.substr(0, h));
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline std::string where(const std::string& src, int line) { return src + ":" + std::to_string(line) + ": "; }

inline long parse_long(const std::string& s, const std::string& ctx) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(s, &used);
  } catch (const std::exception&) {
    fail(ErrorKind::input, ctx + "expected an integer, got '" + s + "'");
  }
  require(used == s.size(), ErrorKind::input, ctx + "expected an integer, got '" + s + "'");
  return v;
}

inline double parse_double(const std::string& s, const std::string& ctx) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    fail(ErrorKind::input, ctx + "expected a number, got '" + s + "'");
  }
  require(used == s.size(), ErrorKind::input, ctx + "expected a number, got '" + s + "'");
  require(std::isfinite(v), ErrorKind::input, ctx + "number is not finite");
  return v;
}

inline std::vector<int> parse_int_list(const std::string& s, const std::string& ctx) {
  std::vector<int> out;
  if (trim(s).empty()) return out;
  for (const auto& part : split(s, ',')) out.push_back(static_cast<int>(parse_long(part, ctx)));
  return out;
}

/// "a=1; b=2,3" into ordered (key, value) pairs.
inline std::vector<std::pair<std::string, std::string>> parse_fields(const std::string& line, const std::string& ctx) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : split(line, ';')) {
    if (f.empty()) continue;
    std::size_t eq = f.find('=');
    require(eq != std::string::npos, ErrorKind::input, ctx + "expected key=value, got '" + f + "'");
    out.emplace_back(trim(f.substr(0, eq)), trim(f.substr(eq + 1)));
  }
  return out;
}

inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string one_based(const std::vector<int>& xs) {
  std::string s;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    if (t) s += ',';
    s += std::to_string(xs[t] + 1);
  }
  return s;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::input, "cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string l;
  while (std::getline(in, l)) lines.push_back(l);
  return lines;
}

inline VariableScheme parse_scheme(const std::string& v, const std::string& ctx) {
  std::vector<int> d = parse_int_list(v, ctx);
  try {
    return VariableScheme(d);
  } catch (const Error& e) {
    throw Error(e.kind(), ctx + e.what());
  }
}

}  // namespace detail

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::input, "cannot write '" + path + "'");
  out << body;
  require(out.good(), ErrorKind::input, "write to '" + path + "' failed");
}

// ---- models -----------------------------------------------------------------

inline LogLinearModel parse_model(const std::vector<std::string>& lines, const std::string& src = "model") {
  std::optional<LogLinearModel> model;
  bool have_theta0 = false;
  double theta0 = 0.0;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::string ctx = detail::where(src, static_cast<int>(n + 1));
    std::string line = detail::strip_comment(lines[n]);
    if (line.empty()) continue;
    auto fields = detail::parse_fields(line, ctx);
    if (fields.size() == 1 && fields[0].first == "scheme") {
      require(!model, ErrorKind::input, ctx + "scheme given twice");
      model.emplace(detail::parse_scheme(fields[0].second, ctx));
      continue;
    }
    if (fields.size() == 1 && fields[0].first == "theta0") {
      require(!have_theta0, ErrorKind::input, ctx + "theta0 given twice");
      have_theta0 = true;
      theta0 = detail::parse_double(fields[0].second, ctx);
      continue;
    }
    require(model.has_value(), ErrorKind::input, ctx + "the scheme line must come before any coefficient");
    std::map<std::string, std::string> f;
    for (auto& [k, v] : fields) {
      require(f.count(k) == 0, ErrorKind::input, ctx + "field '" + k + "' repeated");
      f[k] = v;
    }
    require(f.size() == 3 && f.count("E") && f.count("levels") && f.count("value"), ErrorKind::input,
            ctx + "expected E=...; levels=...; value=...");
    std::vector<int> vars = detail::parse_int_list(f["E"], ctx), lv = detail::parse_int_list(f["levels"], ctx);
    require(!vars.empty() && vars.size() == lv.size(), ErrorKind::input, ctx + "E and levels must be nonempty and equally long");
    std::vector<std::pair<Var, Level>> pairs;
    for (std::size_t t = 0; t < vars.size(); ++t) pairs.emplace_back(vars[t] - 1, lv[t] - 1);
    InteractionKey key = InteractionKey::make(pairs);
    for (std::size_t t = 1; t < key.vars.size(); ++t)
      require(key.vars[t] != key.vars[t - 1], ErrorKind::input, ctx + "a variable appears twice in E");
    double value = detail::parse_double(f["value"], ctx);
    try {
      model->validate(key);
    } catch (const Error& e) {
      throw Error(ErrorKind::input, ctx + e.what());
    }
    require(!model->contains(key), ErrorKind::input, ctx + "duplicate interaction key");
    model->set(key, value);
  }
  require(model.has_value(), ErrorKind::input, src + ": missing scheme line");
  if (have_theta0) {
    model->set_theta0(theta0);
  } else {
    model->set_theta0(tensor_from_loglinear(*model).theta0);
  }
  return *model;
}

inline LogLinearModel load_model(const std::string& path) { return parse_model(detail::read_lines(path), path); }

inline std::string format_model(const LogLinearModel& m) {
  std::ostringstream o;
  std::vector<int> d = m.scheme().dims();
  o << "scheme=";
  for (std::size_t j = 0; j < d.size(); ++j) o << (j ? "," : "") << d[j];
  o << "\ntheta0=" << detail::fmt(m.theta0()) << "\n";
  for (const auto& [key, v] : m.terms())
    o << "E=" << detail::one_based(key.vars) << "; levels=" << detail::one_based(key.levels) << "; value=" << detail::fmt(v) << "\n";
  return o.str();
}

// ---- tensors ----------------------------------------------------------------

inline NonnegTensor parse_tensor(const std::vector<std::string>& lines, const std::string& src = "tensor") {
  std::optional<VariableScheme> scheme;
  std::vector<double> vals;
  std::vector<unsigned char> seen;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::string ctx = detail::where(src, static_cast<int>(n + 1));
    std::string line = detail::strip_comment(lines[n]);
    if (line.empty()) continue;
    auto fields = detail::parse_fields(line, ctx);
    if (fields.size() == 1 && fields[0].first == "scheme") {
      require(!scheme, ErrorKind::input, ctx + "scheme given twice");
      scheme = detail::parse_scheme(fields[0].second, ctx);
      vals.assign(scheme->cells(), 0.0);
      seen.assign(scheme->cells(), 0);
      continue;
    }
    require(scheme.has_value(), ErrorKind::input, ctx + "the scheme line must come first");
    require(fields.size() == 2 && fields[0].first == "cell" && fields[1].first == "p", ErrorKind::input, ctx + "expected cell=...; p=...");
    std::vector<int> cell = detail::parse_int_list(fields[0].second, ctx);
    for (int& c : cell) --c;
    require(scheme->contains(cell), ErrorKind::input, ctx + "cell out of range");
    double v = detail::parse_double(fields[1].second, ctx);
    require(v >= 0.0, ErrorKind::input, ctx + "tensor entries must be nonnegative");
    std::size_t f = scheme->flat(cell);
    require(!seen[f], ErrorKind::input, ctx + "cell listed twice");
    seen[f] = 1;
    vals[f] = v;
  }
  require(scheme.has_value(), ErrorKind::input, src + ": missing scheme line");
  return NonnegTensor(*scheme, std::move(vals));
}

inline NonnegTensor load_tensor(const std::string& path) { return parse_tensor(detail::read_lines(path), path); }

inline std::string format_tensor(const NonnegTensor& t) {
  std::ostringstream o;
  o << "scheme=";
  for (int j = 0; j < t.shape().p(); ++j) o << (j ? "," : "") << t.shape().levels(j);
  o << "\n";
  for (CellCursor c(t.shape()); !c.done(); c.next())
    if (t[c.flat()] != 0.0) o << "cell=" << detail::one_based(c.cell()) << "; p=" << detail::fmt(t[c.flat()]) << "\n";
  return o.str();
}

// ---- graphs -----------------------------------------------------------------

inline Graph parse_edges_inline(int p, const std::string& spec) {
  Graph g(p);
  if (detail::trim(spec).empty()) return g;
  for (const auto& e : detail::split(spec, ',')) {
    auto ab = detail::split(e, '-');
    require(ab.size() == 2, ErrorKind::usage, "edge '" + e + "' must look like a-b");
    long a = detail::parse_long(ab[0], "edge: "), b = detail::parse_long(ab[1], "edge: ");
    try {
      g.add_edge(static_cast<Var>(a - 1), static_cast<Var>(b - 1));
    } catch (const Error& err) {
      throw Error(ErrorKind::usage, "edge '" + e + "': " + err.what());
    }
  }
  return g;
}

inline Graph load_graph(int p, const std::string& path) {
  auto lines = detail::read_lines(path);
  Graph g(p);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::string ctx = detail::where(path, static_cast<int>(n + 1));
    std::string line = detail::strip_comment(lines[n]);
    if (line.empty()) continue;
    std::istringstream in(line);
    std::string a, b, extra;
    in >> a >> b;
    require(!b.empty() && !(in >> extra), ErrorKind::input, ctx + "expected two variable indices");
    try {
      g.add_edge(static_cast<Var>(detail::parse_long(a, ctx) - 1), static_cast<Var>(detail::parse_long(b, ctx) - 1));
    } catch (const Error& e) {
      throw Error(ErrorKind::input, ctx + e.what());
    }
  }
  return g;
}

// ---- observation data ---------------------------------------------------------

struct LoadedData {
  Dataset data;
  std::vector<std::string> names;
};

/// Reads observation rows or cell counts. Without an explicit scheme each
/// variable gets max(2, largest observed level) levels.
inline LoadedData parse_data(const std::vector<std::string>& lines, const std::string& src, std::optional<VariableScheme> scheme = {}) {
  std::size_t n = 0;
  while (n < lines.size() && detail::strip_comment(lines[n]).empty()) ++n;
  require(n < lines.size(), ErrorKind::input, src + ": no header row");
  LoadedData out;
  out.names = detail::split(detail::strip_comment(lines[n]), ',');
  const bool counts = !out.names.empty() && out.names.back() == "count";
  if (counts) out.names.pop_back();
  const int p = static_cast<int>(out.names.size());
  require(p >= 1, ErrorKind::input, src + ": header names no variables");
  std::vector<Level> y;
  std::vector<int> maxlev(static_cast<std::size_t>(p), 2);
  long rows = 0;
  for (++n; n < lines.size(); ++n) {
    const std::string ctx = detail::where(src, static_cast<int>(n + 1));
    std::string line = detail::strip_comment(lines[n]);
    if (line.empty()) continue;
    auto cols = detail::split(line, ',');
    require(static_cast<int>(cols.size()) == p + (counts ? 1 : 0), ErrorKind::input, ctx + "wrong number of columns");
    std::vector<Level> row;
    for (int j = 0; j < p; ++j) {
      long v = detail::parse_long(cols[static_cast<std::size_t>(j)], ctx);
      require(v >= 1, ErrorKind::input, ctx + "levels are 1-based");
      if (scheme) require(v <= scheme->levels(j), ErrorKind::input, ctx + "level exceeds the scheme");
      require(v <= 1000000, ErrorKind::input, ctx + "level implausibly large");
      maxlev[static_cast<std::size_t>(j)] = std::max(maxlev[static_cast<std::size_t>(j)], static_cast<int>(v));
      row.push_back(static_cast<Level>(v - 1));
    }
    long reps = counts ? detail::parse_long(cols.back(), ctx) : 1;
    require(reps >= 0, ErrorKind::input, ctx + "counts must be nonnegative");
    require(rows + reps <= (1L << 31) - 1, ErrorKind::cap_exceeded, ctx + "too many observations");
    for (long r = 0; r < reps; ++r) y.insert(y.end(), row.begin(), row.end());
    rows += reps;
  }
  out.data = Dataset{scheme ? *scheme : VariableScheme(maxlev), static_cast<int>(rows), std::move(y)};
  require(out.data.scheme.p() == p, ErrorKind::input, src + ": scheme and header disagree on the number of variables");
  out.data.validate();
  return out;
}

inline LoadedData load_data(const std::string& path, std::optional<VariableScheme> scheme = {}) {
  return parse_data(detail::read_lines(path), path, std::move(scheme));
}

inline std::string format_data(const Dataset& d, std::vector<std::string> names = {}) {
  if (names.empty())
    for (int j = 0; j < d.scheme.p(); ++j) names.push_back("y" + std::to_string(j + 1));
  std::ostringstream o;
  for (std::size_t j = 0; j < names.size(); ++j) o << (j ? "," : "") << names[j];
  o << "\n";
  for (int i = 0; i < d.n; ++i) {
    for (int j = 0; j < d.scheme.p(); ++j) o << (j ? "," : "") << d.at(i, j) + 1;
    o << "\n";
  }
  return o.str();
}

// ---- expansions ---------------------------------------------------------------

/// Labelled sections: [weights], then [arm h=<h> j=<j>] per term and variable.
inline std::string format_parafac(const ParafacExpansion& e) {
  std::ostringstream o;
  o << "[weights]\n";
  for (double w : e.weights()) o << detail::fmt(w) << "\n";
  for (std::size_t h = 0; h < e.terms(); ++h)
    for (std::size_t j = 0; j < e.arms()[h].size(); ++j) {
      o << "[arm h=" << h + 1 << " j=" << j + 1 << "]\n";
      for (double x : e.arms()[h][j]) o << detail::fmt(x) << "\n";
    }
  return o.str();
}

inline ParafacExpansion parse_parafac(const VariableScheme& scheme, const std::vector<std::string>& lines, const std::string& src) {
  Vec weights;
  std::map<std::pair<int, int>, Vec> arms;
  Vec* cur = nullptr;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::string ctx = detail::where(src, static_cast<int>(n + 1));
    std::string line = detail::strip_comment(lines[n]);
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']', ErrorKind::input, ctx + "unterminated section header");
      std::string body = line.substr(1, line.size() - 2);
      if (body == "weights") {
        cur = &weights;
        continue;
      }
      int h = 0, j = 0;
      require(std::sscanf(body.c_str(), "arm h=%d j=%d", &h, &j) == 2, ErrorKind::input, ctx + "unknown section '" + body + "'");
      require(h >= 1 && j >= 1 && j <= scheme.p(), ErrorKind::input, ctx + "arm index out of range");
      require(arms.count({h - 1, j - 1}) == 0, ErrorKind::input, ctx + "arm section repeated");
      cur = &arms[{h - 1, j - 1}];
      continue;
    }
    require(cur != nullptr, ErrorKind::input, ctx + "value outside any section");
    cur->push_back(detail::parse_double(line, ctx));
  }
  const std::size_t m = weights.size();
  require(m >= 1, ErrorKind::input, src + ": no weights");
  std::vector<std::vector<Vec>> a(m);
  for (std::size_t h = 0; h < m; ++h)
    for (Var j = 0; j < scheme.p(); ++j) {
      auto it = arms.find({static_cast<int>(h), j});
      require(it != arms.end(), ErrorKind::input, src + ": missing arm h=" + std::to_string(h + 1) + " j=" + std::to_string(j + 1));
      a[h].push_back(it->second);
    }
  require(arms.size() == m * static_cast<std::size_t>(scheme.p()), ErrorKind::input, src + ": arm for a term without a weight");
  return ParafacExpansion(scheme, std::move(weights), std::move(a));
}

inline std::string format_ctucker(const CTuckerExpansion& e) {
  std::ostringstream o;
  o << "[groups]\n" << detail::one_based(e.groups()) << "\n[core]\n";
  const Shape& cs = e.core().shape();
  for (CellCursor c(cs); !c.done(); c.next()) o << detail::one_based(c.cell()) << " " << detail::fmt(e.core()[c.flat()]) << "\n";
  for (std::size_t j = 0; j < e.arms().size(); ++j)
    for (std::size_t h = 0; h < e.arms()[j].size(); ++h) {
      o << "[arm h=" << h + 1 << " j=" << j + 1 << "]\n";
      for (double x : e.arms()[j][h]) o << detail::fmt(x) << "\n";
    }
  return o.str();
}

// ---- H collections ----------------------------------------------------------------

/// "2,2,2" or "2+3,-,4": commas separate variables, '+' joins levels of one
/// variable, '-' is the empty set. Levels are 1-based.
inline HCollection parse_H(const std::string& spec, const VariableScheme& scheme) {
  auto parts = detail::split(spec, ',');
  require(static_cast<int>(parts.size()) == scheme.p(), ErrorKind::usage,
          "--H needs " + std::to_string(scheme.p()) + " comma-separated level sets, got " + std::to_string(parts.size()));
  HCollection H;
  for (Var j = 0; j < scheme.p(); ++j) {
    const std::string& s = parts[static_cast<std::size_t>(j)];
    std::vector<Level> set;
    if (s != "-") {
      require(!s.empty(), ErrorKind::usage, "--H: empty entry (use '-' for the empty set)");
      for (const auto& l : detail::split(s, '+')) {
        long v = detail::parse_long(l, "--H: ");
        require(v >= 1 && v <= scheme.levels(j), ErrorKind::usage, "--H: level " + l + " out of range for variable " + std::to_string(j + 1));
        set.push_back(static_cast<Level>(v - 1));
      }
    }
    std::sort(set.begin(), set.end());
    require(std::adjacent_find(set.begin(), set.end()) == set.end(), ErrorKind::usage, "--H: level repeated");
    H.push_back(std::move(set));
  }
  return H;
}

inline std::string format_H(const HCollection& H) {
  std::string s;
  for (std::size_t j = 0; j < H.size(); ++j) {
    if (j) s += ',';
    if (H[j].empty()) {
      s += '-';
      continue;
    }
    for (std::size_t t = 0; t < H[j].size(); ++t) {
      if (t) s += '+';
      s += std::to_string(H[j][t] + 1);
    }
  }
  return s;
}

// ---- run manifest -------------------------------------------------------------------

inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::input, "cannot open '" + path + "' for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  require(ctx != nullptr, ErrorKind::numeric, "hash context allocation failed");
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 15];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream o;
  for (unsigned int i = 0; i < len; ++i) o << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return o.str();
}

inline std::string utc_timestamp() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// key=value lines; order of insertion is kept.
struct RunManifest {
  std::vector<std::pair<std::string, std::string>> entries;

  void set(const std::string& k, const std::string& v) {
    for (auto& [key, val] : entries)
      if (key == k) {
        val = v;
        return;
      }
    entries.emplace_back(k, v);
  }
  void add_input(const std::string& label, const std::string& path) {
    set("input." + label, path);
    set("input." + label + ".sha256", sha256_file(path));
  }
  std::string format() const {
    std::string s;
    for (const auto& [k, v] : entries) {
      std::string clean = v;
      for (char& c : clean)
        if (c == '\n') c = ' ';
      s += k + "=" + clean + "\n";
    }
    return s;
  }
};

}  // namespace tensorank
