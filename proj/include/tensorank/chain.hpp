#pragma once

// Running the sampler: burn-in, thinning, snapshot traces and resumable
// checkpoints. A checkpoint holds the engine state, the full sampler state
// and the snapshots so far, so a resumed run produces the same trace as an
// uninterrupted one.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "tensorank/ctucker.hpp"
#include "tensorank/error.hpp"
#include "tensorank/random.hpp"

namespace tensorank {

struct ChainSchedule {
  long n_burn = 2000;
  long n_iter = 7000;
  long thin = 5;

  long snapshot_count() const { return n_iter > n_burn ? (n_iter - n_burn) / thin : 0; }
  bool snapshot_at(long t) const { return t > n_burn && (t - n_burn) % thin == 0; }

  void validate() const {
    require(n_burn >= 0 && thin >= 1 && n_iter >= n_burn, ErrorKind::usage, "schedule needs 0 <= burn <= iters and thin >= 1");
  }
};

/// Thinned record of the parameters that determine the implied tensor.
struct Snapshot {
  long iteration = 0;
  std::vector<std::vector<Vec>> lambda;   // [j][h][c]
  std::vector<int> groups;                // [j]
  Vec xi;                                 // [s]
  Vec nu;                                 // [l]
  std::vector<std::vector<Vec>> psi;      // [s][l][h]
  std::vector<int> w_counts;              // observations per core component
  double beta = 0.0;
  Vec delta;
};

inline Snapshot take_snapshot(const CTuckerState& st, long t) {
  Snapshot s;
  s.iteration = t;
  s.lambda = st.lambda;
  s.groups = st.groups;
  s.xi = st.xi;
  s.nu = st.nu();
  s.psi.resize(static_cast<std::size_t>(st.k()));
  for (int g = 0; g < st.k(); ++g)
    for (int l = 0; l < st.k(); ++l) s.psi[static_cast<std::size_t>(g)].push_back(st.psi(g, l));
  s.w_counts.assign(static_cast<std::size_t>(st.k()), 0);
  for (int v : st.w) ++s.w_counts[static_cast<std::size_t>(v)];
  s.beta = st.beta;
  s.delta = st.delta;
  return s;
}

struct ChainTrace {
  std::uint64_t seed = 0;
  ChainSchedule schedule;
  int n = 0;                   // observations the chain was fitted to
  std::vector<Snapshot> snapshots;
};

struct ChainOptions {
  std::string checkpoint_path;   // empty: no checkpoints
  long checkpoint_every = 0;     // iterations between checkpoints (0: only at the end)
  bool resume = false;           // continue from checkpoint_path when it exists
  bool check_invariants = false;
  long stop_after = -1;          // stop (after checkpointing) at this iteration; for tests
  std::function<void(long)> progress;
};

namespace detail {

class TokenWriter {
 public:
  explicit TokenWriter(std::ostream& os) : os_(os) {}
  void tag(const char* t) { os_ << '\n' << t; }
  void num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, " %a", v);
    os_ << buf;
  }
  void num(long v) { os_ << ' ' << v; }
  void num(int v) { os_ << ' ' << v; }
  void vec(const Vec& v) {
    num(static_cast<long>(v.size()));
    for (double x : v) num(x);
  }
  void ivec(const std::vector<int>& v) {
    num(static_cast<long>(v.size()));
    for (int x : v) num(x);
  }
  void mat(const std::vector<std::vector<Vec>>& v) {
    num(static_cast<long>(v.size()));
    for (const auto& a : v) {
      num(static_cast<long>(a.size()));
      for (const auto& b : a) vec(b);
    }
  }

 private:
  std::ostream& os_;
};

class TokenReader {
 public:
  explicit TokenReader(std::istream& is) : is_(is) {}
  std::string word() {
    std::string s;
    if (!(is_ >> s)) fail(ErrorKind::input, "checkpoint truncated");
    return s;
  }
  void expect(const char* t) {
    std::string s = word();
    require(s == t, ErrorKind::input, std::string("checkpoint: expected '") + t + "', found '" + s + "'");
  }
  double real() {
    std::string s = word();
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    require(end && *end == '\0', ErrorKind::input, "checkpoint: bad number '" + s + "'");
    return v;
  }
  long integer() {
    std::string s = word();
    char* end = nullptr;
    long v = std::strtol(s.c_str(), &end, 10);
    require(end && *end == '\0', ErrorKind::input, "checkpoint: bad integer '" + s + "'");
    return v;
  }
  std::size_t count() {
    long v = integer();
    require(v >= 0 && v < (1L << 31), ErrorKind::input, "checkpoint: bad length");
    return static_cast<std::size_t>(v);
  }
  Vec vec() {
    Vec v(count());
    for (double& x : v) x = real();
    return v;
  }
  std::vector<int> ivec() {
    std::vector<int> v(count());
    for (int& x : v) x = static_cast<int>(integer());
    return v;
  }
  std::vector<std::vector<Vec>> mat() {
    std::vector<std::vector<Vec>> v(count());
    for (auto& a : v) {
      a.resize(count());
      for (auto& b : a) b = vec();
    }
    return v;
  }
  std::istream& stream() { return is_; }

 private:
  std::istream& is_;
};

inline void write_state(TokenWriter& w, const CTuckerState& st) {
  w.tag("lambda");
  w.mat(st.lambda);
  w.tag("z");
  w.ivec(st.z);
  w.tag("w");
  w.ivec(st.w);
  w.tag("nu_star");
  w.vec(st.nu_star);
  w.tag("zeta");
  w.mat(st.zeta);
  w.tag("groups");
  w.ivec(st.groups);
  w.tag("xi");
  w.vec(st.xi);
  w.tag("beta");
  w.num(st.beta);
  w.tag("delta");
  w.vec(st.delta);
}

inline CTuckerState read_state(TokenReader& r) {
  CTuckerState st;
  r.expect("lambda");
  st.lambda = r.mat();
  r.expect("z");
  st.z = r.ivec();
  r.expect("w");
  st.w = r.ivec();
  r.expect("nu_star");
  st.nu_star = r.vec();
  r.expect("zeta");
  st.zeta = r.mat();
  r.expect("groups");
  st.groups = r.ivec();
  r.expect("xi");
  st.xi = r.vec();
  r.expect("beta");
  st.beta = r.real();
  r.expect("delta");
  st.delta = r.vec();
  return st;
}

inline void write_snapshot(TokenWriter& w, const Snapshot& s) {
  w.tag("snap");
  w.num(s.iteration);
  w.mat(s.lambda);
  w.ivec(s.groups);
  w.vec(s.xi);
  w.vec(s.nu);
  w.mat(s.psi);
  w.ivec(s.w_counts);
  w.num(s.beta);
  w.vec(s.delta);
}

inline Snapshot read_snapshot(TokenReader& r) {
  r.expect("snap");
  Snapshot s;
  s.iteration = r.integer();
  s.lambda = r.mat();
  s.groups = r.ivec();
  s.xi = r.vec();
  s.nu = r.vec();
  s.psi = r.mat();
  s.w_counts = r.ivec();
  s.beta = r.real();
  s.delta = r.vec();
  return s;
}

}  // namespace detail

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  std::uint64_t seed = 0;
  long iteration = 0;
  ChainSchedule schedule;
  int n = 0, p = 0, m = 0, k = 0;
  Rng rng;
  CTuckerState state;
  std::vector<Snapshot> snapshots;
};

/// Writes to a temporary file, then renames over the target.
inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    require(static_cast<bool>(os), ErrorKind::input, "cannot write checkpoint " + tmp);
    os << "tensorank-checkpoint " << kCheckpointVersion;
    detail::TokenWriter w(os);
    w.tag("seed");
    os << ' ' << c.seed;
    w.tag("iteration");
    w.num(c.iteration);
    w.tag("schedule");
    w.num(c.schedule.n_burn);
    w.num(c.schedule.n_iter);
    w.num(c.schedule.thin);
    w.tag("dims");
    w.num(c.n);
    w.num(c.p);
    w.num(c.m);
    w.num(c.k);
    w.tag("rng");
    os << ' ' << c.rng;
    detail::write_state(w, c.state);
    w.tag("snapshots");
    w.num(static_cast<long>(c.snapshots.size()));
    for (const auto& s : c.snapshots) detail::write_snapshot(w, s);
    os << '\n';
    require(static_cast<bool>(os), ErrorKind::input, "checkpoint write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, ErrorKind::input, "cannot move checkpoint into place: " + ec.message());
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorKind::input, "cannot read checkpoint " + path);
  detail::TokenReader r(is);
  r.expect("tensorank-checkpoint");
  require(r.integer() == kCheckpointVersion, ErrorKind::input, "unsupported checkpoint version");
  Checkpoint c;
  r.expect("seed");
  {
    const std::string w = r.word();
    char* end = nullptr;
    c.seed = std::strtoull(w.c_str(), &end, 10);
    require(!w.empty() && w[0] != '-' && end && *end == '\0', ErrorKind::input, "checkpoint: bad seed '" + w + "'");
  }
  r.expect("iteration");
  c.iteration = r.integer();
  r.expect("schedule");
  c.schedule.n_burn = r.integer();
  c.schedule.n_iter = r.integer();
  c.schedule.thin = r.integer();
  r.expect("dims");
  c.n = static_cast<int>(r.integer());
  c.p = static_cast<int>(r.integer());
  c.m = static_cast<int>(r.integer());
  c.k = static_cast<int>(r.integer());
  r.expect("rng");
  is >> c.rng;
  require(static_cast<bool>(is), ErrorKind::input, "checkpoint: bad engine state");
  c.state = detail::read_state(r);
  r.expect("snapshots");
  std::size_t count = r.count();
  for (std::size_t i = 0; i < count; ++i) c.snapshots.push_back(detail::read_snapshot(r));
  return c;
}

/// Runs iterations 1..n_iter; snapshots after iteration t when t > n_burn
/// and (t - n_burn) is a multiple of thin. Initialization and all sweeps
/// share one engine seeded from `seed`.
inline ChainTrace run_chain(const Dataset& data, const Hyperparameters& hp, const ChainSchedule& sched, std::uint64_t seed,
                            const ChainOptions& opt = {}) {
  sched.validate();
  hp.validate(data.scheme.p());
  ChainTrace trace;
  trace.seed = seed;
  trace.schedule = sched;
  trace.n = data.n;

  Rng rng = make_rng(derive_seed(seed, 0));
  CTuckerState st;
  long t0 = 0;
  const bool have_ckpt = opt.resume && !opt.checkpoint_path.empty() && std::filesystem::exists(opt.checkpoint_path);
  if (have_ckpt) {
    Checkpoint c = load_checkpoint(opt.checkpoint_path);
    require(c.seed == seed && c.schedule.n_burn == sched.n_burn && c.schedule.n_iter == sched.n_iter && c.schedule.thin == sched.thin,
            ErrorKind::input, "checkpoint was written for a different seed or schedule");
    require(c.n == data.n && c.p == data.scheme.p() && c.m == hp.m && c.k == hp.k, ErrorKind::input,
            "checkpoint was written for different data or truncation levels");
    rng = c.rng;
    st = std::move(c.state);
    t0 = c.iteration;
    trace.snapshots = std::move(c.snapshots);
    check_state(st, data, hp);
  } else {
    st = init_state(data, hp, rng);
  }
  auto checkpoint = [&](long t) {
    if (opt.checkpoint_path.empty()) return;
    Checkpoint c{seed, t, sched, data.n, data.scheme.p(), hp.m, hp.k, rng, st, trace.snapshots};
    save_checkpoint(opt.checkpoint_path, c);
  };
  for (long t = t0 + 1; t <= sched.n_iter; ++t) {
    gibbs_sweep(st, data, hp, rng, opt.check_invariants);
    if (sched.snapshot_at(t)) trace.snapshots.push_back(take_snapshot(st, t));
    if (opt.checkpoint_every > 0 && t % opt.checkpoint_every == 0) checkpoint(t);
    if (opt.progress) opt.progress(t);
    if (t == opt.stop_after) {
      checkpoint(t);
      return trace;
    }
  }
  if (!opt.checkpoint_path.empty() && (opt.checkpoint_every <= 0 || sched.n_iter % opt.checkpoint_every != 0)) checkpoint(sched.n_iter);
  return trace;
}

}  // namespace tensorank
