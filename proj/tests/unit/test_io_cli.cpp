#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <fstream>
#include <sstream>

#include "tensorank/io.hpp"
#include "tensorank/reference_models.hpp"

using namespace tensorank;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream o;
  o << in.rdbuf();
  return o.str();
}

fs::path scratch(const std::string& name) {
  fs::path d = fs::temp_directory_path() / "tensorank_cli" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

struct Outcome {
  int code = -1;
  std::string err;
};

Outcome run_cli(const std::string& args, const fs::path& dir) {
  fs::path err = dir / "stderr.txt";
  std::string cmd = std::string(TENSORANK_CLI_PATH) + " " + args + " > " + (dir / "stdout.txt").string() + " 2> " + err.string();
  int st = std::system(cmd.c_str());
  return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, slurp(err)};
}

Error expect_error(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "no error thrown";
  return Error(ErrorKind::usage, "");
}

}  // namespace

TEST(ModelFile, RoundTrip) {
  Rng r = make_rng(41);
  LogLinearModel m = example_three_way_model(3, r);
  LogLinearModel back = parse_model(lines_of(format_model(m)));
  EXPECT_EQ(back.scheme().dims(), m.scheme().dims());
  EXPECT_EQ(back.theta0(), m.theta0());
  ASSERT_EQ(back.size(), m.size());
  for (const auto& [k, v] : m.terms()) EXPECT_EQ(back.get(k), v);
}

TEST(ModelFile, ErrorsCarryLineNumbers) {
  Error e = expect_error([] { parse_model({"scheme=3,3", "# note", "E=1,2; levels=2,4; value=0.5"}, "m.txt"); });
  EXPECT_EQ(e.kind(), ErrorKind::input);
  EXPECT_NE(std::string(e.what()).find("m.txt:3"), std::string::npos) << e.what();
  e = expect_error([] { parse_model({"scheme=3,3", "E=1; levels=2; value=1", "E=1; levels=2; value=2"}); });
  EXPECT_NE(std::string(e.what()).find("duplicate"), std::string::npos);
  e = expect_error([] { parse_model({"E=1; levels=2; value=1"}); });
  EXPECT_EQ(e.kind(), ErrorKind::input);
  e = expect_error([] { parse_model({"scheme=3,3", "E=1,1; levels=2,2; value=1"}); });
  EXPECT_EQ(e.kind(), ErrorKind::input);
}

TEST(ModelFile, Theta0DefaultsToNormalizer) {
  LogLinearModel m = parse_model({"scheme=2,2", "E=1; levels=2; value=1.0"});
  EXPECT_NEAR(tensor_from_loglinear(m).pi.sum(), 1.0, 1e-15);
  EXPECT_NEAR(m.theta0(), -std::log(2.0 + 2.0 * std::exp(1.0)), 1e-14);
}

TEST(TensorFile, RoundTripAndDuplicates) {
  NonnegTensor t(Shape({2, 3}), {0.1, 0.2, 0.0, 0.3, 0.25, 0.15});
  NonnegTensor back = parse_tensor(lines_of(format_tensor(t)));
  EXPECT_EQ(back.max_abs_diff(t), 0.0);
  EXPECT_THROW(parse_tensor({"scheme=2,2", "cell=1,1; p=0.5", "cell=1,1; p=0.5"}), Error);
  EXPECT_THROW(parse_tensor({"scheme=2,2", "cell=3,1; p=0.5"}), Error);
}

TEST(HSpec, ParseAndFormat) {
  VariableScheme s(3, 4);
  HCollection H = parse_H("2+3,-,4", s);
  EXPECT_EQ(H, (HCollection{{1, 2}, {}, {3}}));
  EXPECT_EQ(format_H(H), "2+3,-,4");
  EXPECT_EQ(expect_error([&] { parse_H("2,2", s); }).kind(), ErrorKind::usage);
  EXPECT_EQ(expect_error([&] { parse_H("5,2,2", s); }).kind(), ErrorKind::usage);
  EXPECT_EQ(expect_error([&] { parse_H("2+2,-,-", s); }).kind(), ErrorKind::usage);
}

TEST(Edges, InlineSpec) {
  Graph g = parse_edges_inline(4, "1-2,3-4");
  EXPECT_TRUE(g.adjacent(0, 1));
  EXPECT_TRUE(g.adjacent(2, 3));
  EXPECT_FALSE(g.adjacent(1, 2));
  EXPECT_THROW(parse_edges_inline(4, "1-5"), Error);
}

TEST(DataFile, RowsAndCounts) {
  LoadedData rows = parse_data({"a,b", "1,2", "2,3", "1,1"}, "d.csv");
  EXPECT_EQ(rows.data.n, 3);
  EXPECT_EQ(rows.data.scheme.dims(), (std::vector<int>{2, 3}));
  EXPECT_EQ(rows.data.at(1, 1), 2);
  LoadedData counts = parse_data({"a,b,count", "1,2,3", "2,1,0", "2,2,1"}, "c.csv");
  EXPECT_EQ(counts.data.n, 4);
  EXPECT_EQ(counts.names.size(), 2u);
  EXPECT_EQ(counts.data.at(3, 0), 1);
  EXPECT_THROW(parse_data({"a,b", "1,0"}, "x"), Error);
  EXPECT_THROW(parse_data({"a,b", "1"}, "x"), Error);
  EXPECT_THROW(parse_data({"a,b", "1,3"}, "x", VariableScheme(2, 2)), Error);
}

TEST(Digest, Sha256OfAbc) {
  fs::path d = scratch("digest");
  std::ofstream(d / "abc.txt", std::ios::binary) << "abc";
  EXPECT_EQ(sha256_file((d / "abc.txt").string()), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Cli, ExitCodes) {
  fs::path d = scratch("codes");
  Outcome o = run_cli("bound --bogus", d);
  EXPECT_EQ(o.code, 2);
  EXPECT_EQ(o.err.rfind("error kind=usage message=", 0), 0u) << o.err;
  EXPECT_EQ(std::count(o.err.begin(), o.err.end(), '\n'), 1);
  EXPECT_EQ(run_cli("frobnicate", d).code, 2);
  o = run_cli("bound --model " + (d / "missing.txt").string() + " --out " + (d / "o").string(), d);
  EXPECT_EQ(o.code, 3);
  EXPECT_EQ(o.err.rfind("error kind=input", 0), 0u) << o.err;

  Rng r = make_rng(42);
  write_text_file((d / "three.txt").string(), format_model(example_three_way_model(4, r)));
  o = run_cli("verify --model " + (d / "three.txt").string() + " --H 2,2,2 --merge 3 --out " + (d / "v").string(), d);
  EXPECT_EQ(o.code, 5);
  EXPECT_EQ(o.err.rfind("error kind=numeric", 0), 0u) << o.err;
  o = run_cli("verify --model " + (d / "three.txt").string() + " --H 2,2,3 --merge 1 --out " + (d / "v2").string(), d);
  EXPECT_EQ(o.code, 0) << o.err;
}

TEST(Cli, BoundReportsCrossExample) {
  fs::path d = scratch("bound");
  Rng r = make_rng(43);
  write_text_file((d / "cross.txt").string(), format_model(example_cross_model(7, r)));
  ASSERT_EQ(run_cli("bound --model " + (d / "cross.txt").string() + " --out " + (d / "o").string(), d).code, 0);
  std::string csv = slurp(d / "o" / "bounds.csv");
  EXPECT_NE(csv.find("ordering,7,"), std::string::npos) << csv;
  EXPECT_NE(csv.find("cover,4,"), std::string::npos) << csv;
  EXPECT_NE(csv.find("tight,3,"), std::string::npos) << csv;
  std::string man = slurp(d / "o" / "manifest.txt");
  EXPECT_NE(man.find("input.model.sha256=" + sha256_file((d / "cross.txt").string())), std::string::npos) << man;
}

TEST(Cli, TransformWritesOneManifest) {
  fs::path d = scratch("transform");
  Rng r = make_rng(44);
  write_text_file((d / "m.txt").string(), format_model(example_cross_model(3, r)));
  ASSERT_EQ(run_cli("transform --model " + (d / "m.txt").string() + " --to tensor --out " + (d / "o").string(), d).code, 0);
  int manifests = 0;
  for (const auto& e : fs::recursive_directory_iterator(d / "o")) manifests += e.path().filename() == "manifest.txt";
  EXPECT_EQ(manifests, 1);
  NonnegTensor t = load_tensor((d / "o" / "tensor.txt").string());
  EXPECT_NEAR(t.sum(), 1.0, 1e-12);
}

TEST(Cli, RerunIsByteIdenticalModuloTimestamps) {
  fs::path d = scratch("repro");
  const std::string args = "simulate --p 4 --d 2 --edges 1-2,3-4 --n 80 --fit --m 3 --k 2 --burn 20 --iters 60 --thin 2 --seed 9 --out ";
  ASSERT_EQ(run_cli(args + (d / "a").string(), d).code, 0);
  ASSERT_EQ(run_cli(args + (d / "b").string(), d).code, 0);
  std::size_t compared = 0;
  for (const auto& e : fs::directory_iterator(d / "a")) {
    const std::string name = e.path().filename().string();
    std::string a = slurp(e.path()), b = slurp(d / "b" / name);
    if (name == "manifest.txt") {
      auto strip = [&](const std::string& text, const std::string& dir) {
        std::string out;
        for (const auto& l : lines_of(text)) {
          if (l.rfind("started=", 0) == 0 || l.rfind("finished=", 0) == 0) continue;
          std::string x = l;
          for (std::size_t pos; (pos = x.find(dir)) != std::string::npos;) x.replace(pos, dir.size(), "OUT");
          out += x + "\n";
        }
        return out;
      };
      EXPECT_EQ(strip(a, (d / "a").string()), strip(b, (d / "b").string()));
    } else {
      EXPECT_EQ(a, b) << name;
    }
    ++compared;
  }
  EXPECT_GE(compared, 8u);
}

TEST(Cli, HelpListsFlagsWithDefaults) {
  fs::path d = scratch("help");
  for (const char* sub : {"bound", "oracle", "verify", "transform", "simulate", "fit", "prior-study"}) {
    Outcome o = run_cli(std::string(sub) + " --help", d);
    EXPECT_EQ(o.code, 0) << sub;
    std::string text = slurp(d / "stdout.txt");
    EXPECT_NE(text.find("--out TEXT [tensorank-out]"), std::string::npos) << sub;
  }
  std::string fit = slurp(d / "stdout.txt");
  EXPECT_NE(fit.find("--draws"), std::string::npos);
  run_cli("fit --help", d);
  fit = slurp(d / "stdout.txt");
  EXPECT_NE(fit.find("--burn INT [2000]"), std::string::npos);
  EXPECT_NE(fit.find("--iters INT [7000]"), std::string::npos);
  EXPECT_NE(fit.find("--thin INT [5]"), std::string::npos);
}
