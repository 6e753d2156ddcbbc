// tensorank command line: rank bounds, NTF oracle, partition checks, c-Tucker
// fitting and the simulation studies. Every run writes into one output
// directory holding its results and a manifest.txt.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tensorank/tensorank.hpp"

namespace fs = std::filesystem;
using namespace tensorank;

namespace {

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage: return 2;
    case ErrorKind::input: return 3;
    case ErrorKind::precondition: return 3;
    case ErrorKind::cap_exceeded: return 4;
    case ErrorKind::numeric: return 5;
  }
  return 1;
}

std::string quote(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '"') c = ' ';
  return "\"" + s + "\"";
}

int thread_cap() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const char* env = std::getenv("TENSORANK_THREADS");
  if (env == nullptr || *env == '\0') return static_cast<int>(hw);
  char* end = nullptr;
  long v = std::strtol(env, &end, 10);
  require(end != env && *end == '\0' && v >= 1 && v <= 4096, ErrorKind::usage, "TENSORANK_THREADS must be a positive integer");
  return static_cast<int>(std::min<long>(v, hw));
}

/// State shared by all subcommands.
struct Run {
  std::string out_dir = "tensorank-out";
  std::uint64_t seed = 1;
  bool seeded = false;
  RunManifest manifest;
  CLI::App* sub = nullptr;

  fs::path path(const std::string& name) const { return fs::path(out_dir) / name; }

  void begin(const std::string& name) {
    manifest.set("tool", "tensorank");
    manifest.set("version", kToolVersion);
    manifest.set("subcommand", name);
    manifest.set("seed", seeded ? std::to_string(seed) : "none");
    manifest.set("started", utc_timestamp());
    for (const CLI::Option* o : sub->get_options()) {
      if (o->get_lnames().empty() || o->get_lnames().front() == "help") continue;
      const std::string key = "flag." + o->get_lnames().front();
      if (o->count() > 0) {
        std::string v;
        for (const auto& r : o->results()) v += (v.empty() ? "" : " ") + r;
        manifest.set(key, v.empty() ? "true" : v);
      } else if (o->get_expected_max() == 0) {
        manifest.set(key, "false");
      } else {
        manifest.set(key, o->get_default_str());
      }
    }
    // Digests of the input files, so a rerun can confirm it reads the same data.
    for (const char* name : {"model", "tensor", "expansion", "graph", "data", "truth"}) {
      const CLI::Option* o = sub->get_option_no_throw(std::string("--") + name);
      if (o && o->count() > 0) manifest.set(std::string("input.") + name + ".sha256", sha256_file(o->results().front()));
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    require(!ec && fs::is_directory(out_dir), ErrorKind::input, "cannot create output directory '" + out_dir + "'");
  }

  void write(const std::string& name, const std::string& body) {
    write_text_file(path(name).string(), body);
    manifest.set("output." + name, path(name).string());
  }

  void finish() {
    manifest.set("finished", utc_timestamp());
    write_text_file(path("manifest.txt").string(), manifest.format());
  }
};

void add_common(CLI::App* sc, Run& run, bool seeded) {
  sc->add_option("--out", run.out_dir, "output directory (created if missing)")->capture_default_str();
  if (seeded) sc->add_option("--seed", run.seed, "root seed; every random stream is derived from it")->capture_default_str();
}

template <class T>
std::string set_or_dash(const std::vector<T>& xs) {
  return xs.empty() ? "-" : detail::one_based(xs);
}

std::string format_levels(const std::vector<Level>& ls) {
  if (ls.empty()) return "-";
  std::string s;
  for (std::size_t t = 0; t < ls.size(); ++t) s += (t ? "+" : "") + std::to_string(ls[t] + 1);
  return s;
}

std::vector<Var> parse_var_list(const std::string& s, int p, const std::string& what) {
  std::vector<Var> out;
  if (s.empty()) return out;
  for (const auto& part : detail::split(s, ',')) {
    long v = detail::parse_long(part, what + ": ");
    require(v >= 1 && v <= p, ErrorKind::usage, what + ": variable " + part + " out of range");
    out.push_back(static_cast<Var>(v - 1));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<int> parse_m_range(const std::string& s) {
  std::vector<int> out;
  if (s.empty()) return out;
  auto colon = s.find(':');
  if (colon != std::string::npos) {
    long a = detail::parse_long(detail::trim(s.substr(0, colon)), "--m-range: ");
    long b = detail::parse_long(detail::trim(s.substr(colon + 1)), "--m-range: ");
    require(a >= 1 && b >= a && b - a < 10000, ErrorKind::usage, "--m-range: need 1 <= a <= b");
    for (long m = a; m <= b; ++m) out.push_back(static_cast<int>(m));
    return out;
  }
  for (const auto& part : detail::split(s, ',')) {
    long m = detail::parse_long(part, "--m-range: ");
    require(m >= 1, ErrorKind::usage, "--m-range: ranks must be positive");
    out.push_back(static_cast<int>(m));
  }
  return out;
}

// ---- c-Tucker flags shared by fit and simulate --------------------------------

struct FitFlags {
  int m = 10;
  int k = 3;
  long burn = 2000, iters = 7000, thin = 5;
  bool long_schedule = false;
  std::string arms = "decreasing";
  std::string groups = "learn";
  std::string checkpoint;
  long checkpoint_every = 0;
  bool resume = false;
  bool progress = false;
  bool check = false;

  void add(CLI::App* sc) {
    sc->add_option("--m", m, "latent classes per group")->capture_default_str();
    sc->add_option("--k", k, "groups and core components")->capture_default_str();
    sc->add_option("--burn", burn, "burn-in iterations")->capture_default_str();
    sc->add_option("--iters", iters, "total iterations, burn-in included")->capture_default_str();
    sc->add_option("--thin", thin, "keep every thin-th iteration after burn-in")->capture_default_str();
    sc->add_flag("--long-schedule", long_schedule, "burn 10000, then 15000 more iterations (iters 25000), thin 10");
    sc->add_option("--arm-schedule", arms, "arm Dirichlet concentrations")->check(CLI::IsMember({"flat", "decreasing"}))->capture_default_str();
    sc->add_option("--groups", groups, "learn, or fixed:<label per variable> with 1-based labels")->capture_default_str();
    sc->add_option("--checkpoint", checkpoint, "checkpoint file (written at the end and every --checkpoint-every iterations)");
    sc->add_option("--checkpoint-every", checkpoint_every, "iterations between checkpoints; 0 writes only at the end")->capture_default_str();
    sc->add_flag("--resume", resume, "continue from --checkpoint when it exists");
    sc->add_flag("--progress", progress, "print the iteration count to stderr every 1000 iterations");
    sc->add_flag("--check-invariants", check, "verify every state invariant after each sweep");
  }

  Hyperparameters hyper(int p) const {
    Hyperparameters hp;
    hp.m = m;
    hp.k = k;
    hp.arms = parse_arm_schedule(arms);
    if (groups != "learn") {
      require(groups.rfind("fixed:", 0) == 0, ErrorKind::usage, "--groups must be 'learn' or 'fixed:<labels>'");
      std::vector<int> labels = detail::parse_int_list(groups.substr(6), "--groups: ");
      require(static_cast<int>(labels.size()) == p, ErrorKind::usage, "--groups: need one label per variable");
      for (int& g : labels) {
        require(g >= 1 && g <= k, ErrorKind::usage, "--groups: labels must lie in 1..k");
        --g;
      }
      hp.fixed_groups = labels;
    }
    hp.validate(p);
    return hp;
  }

  ChainSchedule schedule() const {
    ChainSchedule s = long_schedule ? ChainSchedule{10000, 25000, 10} : ChainSchedule{burn, iters, thin};
    s.validate();
    return s;
  }

  ChainOptions options() const {
    ChainOptions o;
    o.checkpoint_path = checkpoint;
    o.checkpoint_every = checkpoint_every;
    o.resume = resume;
    o.check_invariants = check;
    require(!resume || !checkpoint.empty(), ErrorKind::usage, "--resume needs --checkpoint");
    if (progress)
      o.progress = [](long t) {
        if (t % 1000 == 0) std::cerr << "iteration " << t << "\n";
      };
    return o;
  }
};

std::string groups_as_sets(const std::vector<int>& labels) {
  int k = 0;
  for (int g : labels) k = std::max(k, g + 1);
  std::string s;
  for (int g = 0; g < k; ++g) {
    std::string set;
    for (std::size_t j = 0; j < labels.size(); ++j)
      if (labels[j] == g) set += (set.empty() ? "" : ",") + std::to_string(j + 1);
    s += (g ? "|" : "") + std::string("{") + set + "}";
  }
  return s;
}

/// Writes the posterior summary tables; returns the summary.
PosteriorSummary write_posterior(Run& run, const ChainTrace& trace, const VariableScheme& scheme, const std::vector<std::string>& names) {
  SummaryOptions so;
  PosteriorSummary sm = posterior_summary(trace, scheme, so);
  const int p = scheme.p();
  std::ostringstream s;
  s << "snapshots=" << sm.snapshots << "\n";
  s << "occupancy_threshold=" << occupancy_threshold(trace.n, so) << "\n";
  s << "core_rank_prob=" << detail::fmt(sm.core_rank_prob) << "\n";
  for (std::size_t g = 0; g < sm.occupied_group_prob.size(); ++g) s << "occupied_groups_" << g << "=" << detail::fmt(sm.occupied_group_prob[g]) << "\n";
  run.write("summary.txt", s.str());
  run.manifest.set("result.core_rank_prob", detail::fmt(sm.core_rank_prob));

  std::ostringstream gc;
  gc << "rank,groups,probability\n";
  for (std::size_t i = 0; i < sm.group_configs.size(); ++i)
    gc << i + 1 << "," << quote(groups_as_sets(sm.group_configs[i].labels)) << "," << detail::fmt(sm.group_configs[i].probability) << "\n";
  run.write("group_configs.csv", gc.str());

  std::ostringstream cv;
  cv << "var_a,var_b,name_a,name_b,mean_v,prob_v_above_0.1\n";
  for (Var a = 0; a < p; ++a)
    for (Var b = a + 1; b < p; ++b)
      cv << a + 1 << "," << b + 1 << "," << names[static_cast<std::size_t>(a)] << "," << names[static_cast<std::size_t>(b)] << ","
         << detail::fmt(sm.cramers_v_mean[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]) << ","
         << detail::fmt(sm.cramers_v_exceed[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]) << "\n";
  run.write("cramers_v.csv", cv.str());

  std::ostringstream th;
  th << "E,levels,mean,lower,upper\n";
  for (const auto& [key, iv] : sm.theta_intervals)
    th << quote(detail::one_based(key.vars)) << "," << quote(detail::one_based(key.levels)) << "," << detail::fmt(iv.mean) << ","
       << detail::fmt(iv.lower) << "," << detail::fmt(iv.upper) << "\n";
  run.write("theta_intervals.csv", th.str());
  return sm;
}

void write_coverage(Run& run, const PosteriorSummary& sm, const LogLinearModel& truth) {
  CoverageReport cov = coverage_report(sm, truth);
  std::ostringstream o;
  o << "E,levels,truth,lower,upper,covered\n";
  for (const auto& r : cov.rows)
    o << quote(detail::one_based(r.key.vars)) << "," << quote(detail::one_based(r.key.levels)) << "," << detail::fmt(r.truth) << ","
      << detail::fmt(r.interval.lower) << "," << detail::fmt(r.interval.upper) << "," << (r.covered ? 1 : 0) << "\n";
  run.write("coverage.csv", o.str());
  run.manifest.set("result.coverage", detail::fmt(cov.coverage));
  std::cout << "coverage of 95% intervals over two-way terms: " << cov.coverage << "\n";
}

// ---- subcommands -------------------------------------------------------------------

void cmd_bound(Run& run, const std::string& model_path, const std::string& search, const std::string& J, bool ignore_main, std::uint64_t cap) {
  run.begin("bound");
  run.manifest.add_input("model", model_path);
  LogLinearModel model = load_model(model_path);
  HierarchyOptions ho{ignore_main};
  OrderingBound t1 = ordering_bound(model, search == "greedy" ? PermutationSearch::greedy : PermutationSearch::exhaustive, ho);
  CoverBoundsReport t2 = cover_bounds(model, ho, cap);
  std::optional<std::vector<Var>> Jv;
  if (!J.empty()) Jv = parse_var_list(J, model.scheme().p(), "--J");
  StructuralBounds cr = structural_bounds(model, Jv, ho);

  std::string b_sets;
  for (std::size_t t = 0; t < t1.B.size(); ++t) b_sets += (t ? "," : "") + format_levels(t1.B[t]);
  struct Row {
    std::string name, value, witness;
  };
  std::vector<Row> rows = {
      {"ordering", std::to_string(t1.value), "sigma=" + set_or_dash(t1.sigma) + " B=" + b_sets + (t1.exhaustive ? "" : " (greedy)")},
      {"cover", std::to_string(t2.cover.value), "H=" + format_H(t2.cover.H)},
      {"tight", std::to_string(t2.tight.value),
       "H=" + format_H(t2.tight.H) + " l=" + (t2.tight.l >= 0 ? std::to_string(t2.tight.l + 1) : "-") + " W=" + set_or_dash(t2.tight.W) +
           " W_bar=" + set_or_dash(t2.tight.W_bar)},
      {"tucker", std::to_string(t2.tucker.value), "H=" + format_H(t2.tucker.H)},
      {"few_levels", std::to_string(cr.few_levels.value), "m=" + std::to_string(cr.m)},
  };
  auto cor_row = [&](const char* name, const StructuralBound& b) {
    rows.push_back({name, b.applies ? std::to_string(b.value) : "n/a", b.applies ? "J=" + detail::one_based(*Jv) : b.reason});
  };
  cor_row("conditional", cr.conditional);
  cor_row("marginal", cr.marginal);

  std::size_t w0 = 5, w1 = 5;
  for (const auto& r : rows) {
    w0 = std::max(w0, r.name.size());
    w1 = std::max(w1, r.value.size());
  }
  std::ostringstream txt, csv;
  txt << std::left << std::setw(static_cast<int>(w0)) << "bound" << "  " << std::setw(static_cast<int>(w1)) << "value" << "  witness\n";
  csv << "bound_name,value,witness\n";
  for (const auto& r : rows) {
    txt << std::left << std::setw(static_cast<int>(w0)) << r.name << "  " << std::setw(static_cast<int>(w1)) << r.value << "  " << r.witness << "\n";
    csv << r.name << "," << r.value << "," << quote(r.witness) << "\n";
  }
  txt << "search: nodes=" << t2.stats.nodes << " covers=" << t2.stats.yielded << " complete=" << (t2.stats.complete ? "yes" : "no") << "\n";
  std::cout << txt.str();
  run.write("report.txt", txt.str());
  run.write("bounds.csv", csv.str());
  run.manifest.set("result.ordering", std::to_string(t1.value));
  run.manifest.set("result.cover", std::to_string(t2.cover.value));
  run.manifest.set("result.tight", std::to_string(t2.tight.value));
  run.manifest.set("result.tucker", std::to_string(t2.tucker.value));
  run.manifest.set("search.nodes", std::to_string(t2.stats.nodes));
  run.manifest.set("search.complete", t2.stats.complete ? "true" : "false");
  run.finish();
}

NonnegTensor tensor_input(Run& run, const std::string& model_path, const std::string& tensor_path) {
  require(model_path.empty() != tensor_path.empty(), ErrorKind::usage, "give exactly one of --model and --tensor");
  if (!model_path.empty()) {
    run.manifest.add_input("model", model_path);
    return tensor_from_loglinear(load_model(model_path)).pi;
  }
  run.manifest.add_input("tensor", tensor_path);
  return load_tensor(tensor_path);
}

void cmd_oracle(Run& run, const std::string& model_path, const std::string& tensor_path, NtfConfig ntf, const std::string& m_range,
                int witness) {
  run.begin("oracle");
  NonnegTensor t = tensor_input(run, model_path, tensor_path);
  ntf.seed = derive_seed(run.seed, 1);
  ntf.threads = thread_cap();
  OracleConfig oc;
  oc.ntf = ntf;
  oc.m_range = parse_m_range(m_range);
  if (witness > 0) oc.witness_terms = witness;
  OracleResult r = oracle_nonneg_rank(t, oc);
  std::ostringstream csv;
  csv << "m,residual\n";
  for (auto [m, res] : r.residuals) csv << m << "," << detail::fmt(res) << "\n";
  run.write("oracle.csv", csv.str());
  std::ostringstream s;
  s << "certified_lower=" << r.certified_lower << "\n";
  s << "heuristic_upper=" << (r.heuristic_upper ? std::to_string(*r.heuristic_upper) : "none") << "\n";
  s << "certified_upper=" << (r.certified_upper ? std::to_string(*r.certified_upper) : "none") << "\n";
  s << "exact=" << (r.exact ? "true" : "false") << "\n";
  s << "exact_rank=" << (r.exact_rank ? std::to_string(*r.exact_rank) : "none") << "\n";
  std::cout << s.str();
  run.write("oracle.txt", s.str());
  run.manifest.set("result.certified_lower", std::to_string(r.certified_lower));
  run.manifest.set("result.heuristic_upper", r.heuristic_upper ? std::to_string(*r.heuristic_upper) : "none");
  run.finish();
}

int cmd_verify(Run& run, const std::string& model_path, const std::string& H_spec, int merge, double tol, bool ignore_main) {
  run.begin("verify");
  run.manifest.add_input("model", model_path);
  LogLinearModel model = load_model(model_path);
  const VariableScheme& scheme = model.scheme();
  HCollection H = parse_H(H_spec, scheme);
  ProbabilityTensor pi = tensor_from_loglinear(model).pi;
  Partition part = build_partition(pi.shape(), H);
  const std::size_t unmerged = part.size();
  if (merge != 0) {
    require(merge >= 1 && merge <= scheme.p(), ErrorKind::usage, "--merge: variable out of range");
    part = merge_partition(part, merge - 1, support_summary(model, HierarchyOptions{ignore_main}).independent);
  }
  CIReport ci = verify_conditional_independence(pi, part, tol);
  const bool covers = hits_all(H, support_summary(model, HierarchyOptions{ignore_main}).two_way);
  std::ostringstream s;
  s << "H=" << format_H(H) << "\n";
  s << "covers_two_way_support=" << (covers ? "true" : "false") << "\n";
  s << "blocks_unmerged=" << unmerged << "\n";
  s << "merge=" << (merge ? std::to_string(merge) : "none") << "\n";
  s << "blocks=" << part.size() << "\n";
  s << "max_violation=" << detail::fmt(ci.worst) << "\n";
  s << "tolerance=" << detail::fmt(tol) << "\n";
  s << "ci_holds=" << (ci.holds ? "true" : "false") << "\n";
  if (ci.holds) {
    ParafacExpansion e = parafac_from_partition(pi, part, tol);
    ProbabilityTensor back = eval_parafac(e);
    s << "terms=" << e.terms() << "\n";
    s << "reconstruction_error=" << detail::fmt(back.max_abs_diff(pi)) << "\n";
    run.write("expansion.txt", format_parafac(e));
  } else {
    s << "worst_block=" << ci.worst_block + 1 << "\n";
  }
  std::cout << s.str();
  run.write("verify.txt", s.str());
  run.manifest.set("result.blocks", std::to_string(part.size()));
  run.manifest.set("result.ci_holds", ci.holds ? "true" : "false");
  run.manifest.set("result.max_violation", detail::fmt(ci.worst));
  run.finish();
  if (!ci.holds) {
    std::cerr << "error kind=numeric message=" << quote("conditional independence fails: max violation " + detail::fmt(ci.worst)) << "\n";
    return exit_code(ErrorKind::numeric);
  }
  return 0;
}

struct TransformFlags {
  std::string model, tensor, expansion, scheme, reference, to = "tensor";
  int d = 4;
  double prune = 0.0;
  bool ignore_main = false;
};

void cmd_transform(Run& run, const TransformFlags& f) {
  run.begin("transform");
  int sources = !f.model.empty() + !f.tensor.empty() + !f.expansion.empty() + !f.reference.empty();
  require(sources == 1, ErrorKind::usage, "give exactly one of --model, --tensor, --expansion, --reference");
  if (!f.tensor.empty()) {
    run.manifest.add_input("tensor", f.tensor);
    require(f.to == "model", ErrorKind::usage, "a tensor can only be transformed --to model");
    run.write("model.txt", format_model(theta_from_tensor(load_tensor(f.tensor), f.prune)));
    run.finish();
    return;
  }
  if (!f.expansion.empty()) {
    run.manifest.add_input("expansion", f.expansion);
    require(!f.scheme.empty(), ErrorKind::usage, "--expansion needs --scheme");
    require(f.to == "tensor", ErrorKind::usage, "an expansion can only be transformed --to tensor");
    VariableScheme sc = detail::parse_scheme(f.scheme, "--scheme: ");
    run.write("tensor.txt", format_tensor(eval_parafac(parse_parafac(sc, detail::read_lines(f.expansion), f.expansion))));
    run.finish();
    return;
  }
  LogLinearModel model;
  if (!f.model.empty()) {
    run.manifest.add_input("model", f.model);
    model = load_model(f.model);
  } else {
    Rng rng = make_rng(derive_seed(run.seed, 2));
    if (f.reference == "cross") {
      model = example_cross_model(f.d, rng);
    } else if (f.reference == "three-way") {
      model = example_three_way_model(f.d, rng);
    } else if (f.reference == "five-variable") {
      model = example_five_variable_model(f.d, rng);
    } else if (f.reference == "saturated") {
      model = saturated_model(VariableScheme(f.d, 2), rng);
    } else {
      fail(ErrorKind::usage, "--reference must be cross, three-way, five-variable or saturated");
    }
  }
  if (f.to == "model") {
    run.write("model.txt", format_model(model));
  } else if (f.to == "tensor") {
    run.write("tensor.txt", format_tensor(tensor_from_loglinear(model).pi));
  } else if (f.to == "parafac") {
    HierarchyOptions ho{f.ignore_main};
    TightBound tb = tight_cover_bound(model, ho);
    ProbabilityTensor pi = tensor_from_loglinear(model).pi;
    Partition part = tight_partition(pi.shape(), tb, support_summary(model, ho).independent);
    run.write("expansion.txt", format_parafac(parafac_from_partition(pi, part)));
    run.manifest.set("result.terms", std::to_string(part.size()));
  } else {
    fail(ErrorKind::usage, "--to must be tensor, model or parafac");
  }
  run.finish();
}

struct SimulateFlags {
  int p = 7, d = 2, figure = 0;
  std::string edges, graph;
  long n = 1000;
  double sigma2 = 9.0;
  bool fit = false;
};

Graph pick_graph(Run& run, int p, const std::string& edges, const std::string& graph, int figure) {
  int given = !edges.empty() + !graph.empty() + (figure != 0);
  require(given <= 1, ErrorKind::usage, "give at most one of --edges, --graph, --figure");
  if (!graph.empty()) {
    run.manifest.add_input("graph", graph);
    return load_graph(p, graph);
  }
  if (figure != 0) {
    Graph g = figure_graph(figure);
    require(g.p() == p, ErrorKind::usage, "--figure " + std::to_string(figure) + " has " + std::to_string(g.p()) + " variables; set --p to match");
    return g;
  }
  return parse_edges_inline(p, edges);
}

void cmd_simulate(Run& run, const SimulateFlags& f, const FitFlags& ff) {
  run.begin("simulate");
  require(f.p >= 1 && f.d >= 2, ErrorKind::usage, "need --p >= 1 and --d >= 2");
  VariableScheme scheme(f.p, f.d);
  Graph g = pick_graph(run, f.p, f.edges, f.graph, f.figure);
  SimulatedData sim = simulate_dataset(scheme, g, f.n, f.sigma2, derive_seed(run.seed, 3));
  run.write("data.csv", format_data(sim.data));
  run.write("model.txt", format_model(sim.model));
  run.write("tensor.txt", format_tensor(sim.truth));
  std::ostringstream tv;
  tv << "var_a,var_b,true_v\n";
  for (Var a = 0; a < f.p; ++a)
    for (Var b = a + 1; b < f.p; ++b) tv << a + 1 << "," << b + 1 << "," << detail::fmt(cramers_v(sim.truth, a, b).value) << "\n";
  run.write("true_cramers_v.csv", tv.str());
  if (f.fit && f.n > 0) {
    Hyperparameters hp = ff.hyper(f.p);
    ChainTrace tr = run_chain(sim.data, hp, ff.schedule(), derive_seed(run.seed, 4), ff.options());
    std::vector<std::string> names;
    for (int j = 0; j < f.p; ++j) names.push_back("y" + std::to_string(j + 1));
    PosteriorSummary sm = write_posterior(run, tr, scheme, names);
    write_coverage(run, sm, sim.model);
    std::cout << "core_rank_prob=" << sm.core_rank_prob << "\n";
  }
  run.finish();
}

void cmd_fit(Run& run, const std::string& data_path, const std::string& scheme_str, const std::string& truth, const FitFlags& ff) {
  run.begin("fit");
  run.manifest.add_input("data", data_path);
  std::optional<VariableScheme> sc;
  if (!scheme_str.empty()) sc = detail::parse_scheme(scheme_str, "--scheme: ");
  LoadedData ld = load_data(data_path, sc);
  Hyperparameters hp = ff.hyper(ld.data.scheme.p());
  ChainTrace tr = run_chain(ld.data, hp, ff.schedule(), derive_seed(run.seed, 4), ff.options());
  PosteriorSummary sm = write_posterior(run, tr, ld.data.scheme, ld.names);
  std::cout << "snapshots=" << sm.snapshots << " core_rank_prob=" << sm.core_rank_prob << "\n";
  if (!truth.empty()) {
    run.manifest.add_input("truth", truth);
    LogLinearModel tm = load_model(truth);
    require(tm.scheme() == ld.data.scheme, ErrorKind::input, "--truth scheme differs from the data scheme");
    write_coverage(run, sm, tm);
  }
  run.finish();
}

void cmd_prior_study(Run& run, PriorStudyConfig cfg, const std::string& schedule, int bins) {
  run.begin("prior-study");
  cfg.schedule = parse_arm_schedule(schedule);
  PriorStudyResult r = induced_prior_study(cfg, derive_seed(run.seed, 5));
  std::ostringstream draws;
  draws << "draw";
  for (int o = 1; o <= cfg.p; ++o) draws << ",rep_order" << o;
  for (int o = 1; o <= cfg.p; ++o) draws << ",l1_order" << o;
  draws << "\n";
  for (std::size_t t = 0; t < r.draws.size(); ++t) {
    draws << t + 1;
    for (double x : r.draws[t].representative) draws << "," << detail::fmt(x);
    for (double x : r.draws[t].l1) draws << "," << detail::fmt(x);
    draws << "\n";
  }
  run.write("draws.csv", draws.str());
  auto hist_csv = [&](const std::vector<double>& xs) {
    Histogram h = histogram(xs, bins);
    std::ostringstream o;
    o << "lower,upper,count\n";
    for (std::size_t b = 0; b < h.counts.size(); ++b) o << detail::fmt(h.edges[b]) << "," << detail::fmt(h.edges[b + 1]) << "," << h.counts[b] << "\n";
    return o.str();
  };
  std::ostringstream s;
  for (int o = 1; o <= cfg.p; ++o) {
    run.write("hist_l1_order" + std::to_string(o) + ".csv", hist_csv(r.column_l1(o)));
    run.write("hist_rep_order" + std::to_string(o) + ".csv", hist_csv(r.column_representative(o)));
    std::vector<double> l1 = r.column_l1(o);
    s << "l1_order" << o << "_min=" << detail::fmt(*std::min_element(l1.begin(), l1.end())) << "\n";
    s << "l1_order" << o << "_p05=" << detail::fmt(quantile(l1, 0.05)) << "\n";
    s << "l1_order" << o << "_median=" << detail::fmt(quantile(l1, 0.5)) << "\n";
  }
  std::cout << s.str();
  run.write("summary.txt", s.str());
  run.finish();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tensorank: nonnegative PARAFAC rank bounds for log-linear models and collapsed-Tucker fitting"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  Run run;
  std::function<int()> action;

  // bound
  std::string model_path, tensor_path, search = "exhaustive", J;
  bool ignore_main = false;
  std::uint64_t cap = kDefaultNodeCap;
  auto* bound = app.add_subcommand("bound", "rank bounds for a log-linear model");
  bound->add_option("--model", model_path, "model file")->required();
  bound->add_option("--search", search, "permutation search for the ordering bound")->check(CLI::IsMember({"exhaustive", "greedy"}))->capture_default_str();
  bound->add_option("--J", J, "1-based variable set for the conditional and marginal bounds, e.g. 1,2,3");
  bound->add_flag("--ignore-main-effects", ignore_main, "skip main effects in the hierarchy checks");
  bound->add_option("--node-cap", cap, "node cap for the cover search")->capture_default_str();
  add_common(bound, run, false);
  bound->callback([&] {
    run.sub = bound;
    action = [&] {
      cmd_bound(run, model_path, search, J, ignore_main, cap);
      return 0;
    };
  });

  // oracle
  NtfConfig ntf;
  std::string m_range;
  int witness = 0;
  auto* oracle = app.add_subcommand("oracle", "numerical nonnegative rank estimate");
  oracle->add_option("--model", model_path, "model file");
  oracle->add_option("--tensor", tensor_path, "tensor file");
  oracle->add_option("--restarts", ntf.restarts, "random restarts per rank")->capture_default_str();
  oracle->add_option("--max-iters", ntf.max_iters, "iterations per restart")->capture_default_str();
  oracle->add_option("--eps", ntf.eps, "max-norm residual target on the unit-mass tensor")->capture_default_str();
  oracle->add_option("--m-range", m_range, "ranks to try: a:b or a list; default from the lower bound upward");
  oracle->add_option("--witness-terms", witness, "term count of a known exact expansion (0: none)")->capture_default_str();
  add_common(oracle, run, true);
  oracle->callback([&] {
    run.sub = oracle;
    run.seeded = true;
    action = [&] {
      cmd_oracle(run, model_path, tensor_path, ntf, m_range, witness);
      return 0;
    };
  });

  // verify
  std::string H_spec;
  int merge = 0;
  double tol = 1e-12;
  auto* verify = app.add_subcommand("verify", "check conditional independence on the partition generated by H");
  verify->add_option("--model", model_path, "model file")->required();
  verify->add_option("--H", H_spec, "1-based level sets: commas between variables, + within, - for empty")->required();
  verify->add_option("--merge", merge, "1-based variable to merge along (0: no merge)")->capture_default_str();
  verify->add_option("--tol", tol, "largest allowed violation")->capture_default_str();
  verify->add_flag("--ignore-main-effects", ignore_main, "skip main effects in the hierarchy checks");
  add_common(verify, run, false);
  verify->callback([&] {
    run.sub = verify;
    action = [&] { return cmd_verify(run, model_path, H_spec, merge, tol, ignore_main); };
  });

  // transform
  TransformFlags tf;
  auto* transform = app.add_subcommand("transform", "convert between models, tensors and expansions");
  transform->add_option("--model", tf.model, "model file");
  transform->add_option("--tensor", tf.tensor, "tensor file");
  transform->add_option("--expansion", tf.expansion, "PARAFAC expansion file");
  transform->add_option("--scheme", tf.scheme, "levels per variable for --expansion, e.g. 2,2,3");
  transform->add_option("--reference", tf.reference, "built-in model: cross, three-way, five-variable, saturated");
  transform->add_option("--d", tf.d, "levels for --reference (variables for saturated)")->capture_default_str();
  transform->add_option("--to", tf.to, "target: tensor, model or parafac")->check(CLI::IsMember({"tensor", "model", "parafac"}))->capture_default_str();
  transform->add_option("--prune", tf.prune, "drop coefficients with |value| at or below this")->capture_default_str();
  transform->add_flag("--ignore-main-effects", tf.ignore_main, "skip main effects in the hierarchy checks");
  add_common(transform, run, true);
  transform->callback([&] {
    run.sub = transform;
    run.seeded = true;
    action = [&] {
      cmd_transform(run, tf);
      return 0;
    };
  });

  // simulate
  SimulateFlags sf;
  FitFlags sim_fit;
  sim_fit.k = 3;
  auto* simulate = app.add_subcommand("simulate", "draw a graphical log-linear model and data; optionally fit it");
  simulate->add_option("--p", sf.p, "variables")->capture_default_str();
  simulate->add_option("--d", sf.d, "levels per variable")->capture_default_str();
  simulate->add_option("--edges", sf.edges, "inline 1-based edges, e.g. 1-2,2-3");
  simulate->add_option("--graph", sf.graph, "edge list file");
  simulate->add_option("--figure", sf.figure, "built-in graph 1..5 (0: none)")->capture_default_str();
  simulate->add_option("--n", sf.n, "observations")->capture_default_str();
  simulate->add_option("--sigma2", sf.sigma2, "variance of the nonzero coefficients")->capture_default_str();
  simulate->add_flag("--fit", sf.fit, "fit the c-Tucker model and report coverage");
  sim_fit.add(simulate);
  add_common(simulate, run, true);
  simulate->callback([&] {
    run.sub = simulate;
    run.seeded = true;
    action = [&] {
      cmd_simulate(run, sf, sim_fit);
      return 0;
    };
  });

  // fit
  std::string data_path, scheme_str, truth;
  FitFlags fit_flags;
  auto* fit = app.add_subcommand("fit", "fit the c-Tucker model by Gibbs sampling");
  fit->add_option("--data", data_path, "CSV of 1-based levels, or cell counts with a final 'count' column")->required();
  fit->add_option("--scheme", scheme_str, "levels per variable (default: largest observed level, at least 2)");
  fit->add_option("--truth", truth, "true model file; adds a coverage table");
  fit_flags.add(fit);
  add_common(fit, run, true);
  fit->callback([&] {
    run.sub = fit;
    run.seeded = true;
    action = [&] {
      cmd_fit(run, data_path, scheme_str, truth, fit_flags);
      return 0;
    };
  });

  // prior-study
  PriorStudyConfig pc;
  std::string schedule = "decreasing";
  int bins = 50;
  auto* prior = app.add_subcommand("prior-study", "coefficients induced by the PARAFAC prior");
  prior->add_option("--p", pc.p, "variables")->capture_default_str();
  prior->add_option("--d", pc.d, "levels per variable")->capture_default_str();
  prior->add_option("--m", pc.m, "PARAFAC terms")->capture_default_str();
  prior->add_option("--schedule", schedule, "arm concentrations")->check(CLI::IsMember({"flat", "decreasing"}))->capture_default_str();
  prior->add_option("--draws", pc.n_draws, "Monte Carlo draws")->capture_default_str();
  prior->add_option("--bins", bins, "histogram bins")->capture_default_str();
  add_common(prior, run, true);
  prior->callback([&] {
    run.sub = prior;
    run.seeded = true;
    action = [&] {
      cmd_prior_study(run, pc, schedule, bins);
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error kind=usage message=" << quote(e.what()) << "\n";
    return exit_code(ErrorKind::usage);
  }
  try {
    return action();
  } catch (const Error& e) {
    std::cerr << "error kind=" << to_string(e.kind()) << " message=" << quote(e.what()) << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error kind=internal message=" << quote(e.what()) << "\n";
    return 1;
  }
}
