#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "localembed/cli.hpp"
#include "localembed/io.hpp"
#include "synthetic.hpp"

using namespace localembed;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("localembed_cli_" + std::to_string(std::rand()) + "_" +
                                       std::to_string(reinterpret_cast<std::uintptr_t>(this) & 0xffff));
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

std::string topic_file(const Workspace& ws, const std::string& name, std::size_t n, std::uint64_t seed) {
  testing::TopicSpec s;
  s.n = n;
  s.d = 50;
  s.labels = 12;
  s.topics = 4;
  s.seed = seed;
  const std::string path = ws / name;
  write_xmc(testing::make_topic_data(s), fs::path(path));
  return path;
}

const std::vector<std::string> kSmall{"--l-hat", "6", "--n-bar", "5", "--clusters", "2", "--k-nn", "5",
                                      "--svp-iters", "10", "--admm-iters", "40"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("train writes a model and is byte reproducible") {
  Workspace ws;
  const std::string data = topic_file(ws, "train.txt", 200, 1);
  const Run a = run(with({"train", "--data", data, "--model", ws / "a.bin"}, kSmall));
  REQUIRE(a.code == kExitOk);
  CHECK(a.out.find("clustering") != std::string::npos);
  CHECK(a.out.find("svp") != std::string::npos);
  CHECK(a.out.find("admm") != std::string::npos);
  CHECK(a.out.find("bytes") != std::string::npos);
  REQUIRE(run(with({"train", "--data", data, "--model", ws / "b.bin", "--threads", "3"}, kSmall)).code == kExitOk);
  CHECK(slurp(ws / "a.bin") == slurp(ws / "b.bin"));
  CHECK(!slurp(ws / "a.bin").empty());
}

TEST_CASE("usage errors exit with code 2") {
  Workspace ws;
  const std::string data = topic_file(ws, "train.txt", 60, 2);
  CHECK(run(with({"train", "--data", data, "--model", ws / "m.bin"}, {"--clusters", "0"})).code == kExitUsage);
  CHECK(run({"train", "--data", data}).code == kExitUsage);
  CHECK(run({"train", "--data", ws / "missing.txt", "--model", ws / "m.bin"}).code == kExitUsage);
  CHECK(run({"eval", "--model", ws / "missing.bin", "--data", data}).code == kExitUsage);
  CHECK(run({"predict", "--model", ws / "missing.bin", "--data", data}).code == kExitUsage);
  CHECK(run({"bogus"}).code == kExitUsage);
  CHECK(run({}).code == kExitUsage);
  CHECK(run(with({"train", "--data", data, "--model", ws / "m.bin"}, {"--metric", "cosine"})).code == kExitUsage);
  CHECK(run({"--help"}).code == kExitOk);
  CHECK(run({"train", "--help"}).code == kExitOk);
}

TEST_CASE("a malformed data file is a failure, not a usage error") {
  Workspace ws;
  std::ofstream(ws / "bad.txt") << "2 3 2\n0 0:1\n";
  const Run r = run({"train", "--data", ws / "bad.txt", "--model", ws / "m.bin"});
  CHECK(r.code == kExitFailure);
  CHECK(r.err.find("bad.txt:2") != std::string::npos);
}

TEST_CASE("eval on a memorized toy problem") {
  Workspace ws;
  // six points with their own label and a one-hot feature each
  std::ofstream f(ws / "eye.txt");
  f << "6 6 6\n";
  for (int i = 0; i < 6; ++i) f << i << ' ' << i << ":1\n";
  f.close();
  REQUIRE(run({"train", "--data", ws / "eye.txt", "--model", ws / "eye.bin", "--l-hat", "6", "--n-bar", "1",
               "--clusters", "1", "--k-nn", "1", "--mu", "0", "--lambda", "1e-8", "--admm-iters", "500"})
              .code == kExitOk);
  const Run r = run({"eval", "--model", ws / "eye.bin", "--data", ws / "eye.txt", "--output", ws / "eval.csv"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("P@1 1.0000") != std::string::npos);
  const std::string csv = slurp(ws / "eval.csv");
  CHECK(csv.rfind("k,precision\n1,1.000000\n3,", 0) == 0);
  CHECK(run({"eval", "--model", ws / "eye.bin", "--data", ws / "eye.txt", "--output", ws / "e.csv", "--ks", "7"}).code ==
        kExitUsage);

  const Run p = run({"predict", "--model", ws / "eye.bin", "--data", ws / "eye.txt", "--top", "1"});
  REQUIRE(p.code == kExitOk);
  CHECK(p.out == "0:1.000000\n1:1.000000\n2:1.000000\n3:1.000000\n4:1.000000\n5:1.000000\n");
}

TEST_CASE("eval csv is identical across runs") {
  Workspace ws;
  const std::string tr = topic_file(ws, "tr.txt", 200, 3);
  const std::string te = topic_file(ws, "te.txt", 80, 4);
  for (const char* tag : {"1", "2"}) {
    REQUIRE(run(with({"train", "--data", tr, "--model", ws / (std::string("m") + tag)}, kSmall)).code == kExitOk);
    REQUIRE(run({"eval", "--model", ws / (std::string("m") + tag), "--data", te, "--output", ws / (std::string("e") + tag)})
                .code == kExitOk);
  }
  CHECK(slurp(ws / "e1") == slurp(ws / "e2"));
}

TEST_CASE("grid evaluation") {
  Workspace ws;
  const std::string tr = topic_file(ws, "tr.txt", 200, 5);
  const std::string te = topic_file(ws, "te.txt", 60, 6);
  const Run r = run(with({"eval", "--grid", "--train", tr, "--data", te, "--output", ws / "e.csv", "--grid-lambda", "0.1,1",
                          "--grid-mu", "0", "--grid-k-nn", "3,5", "--grid-n-bar", "5", "--grid-output", ws / "g.csv",
                          "--model", ws / "tuned.bin"},
                         {"--l-hat", "6", "--clusters", "1", "--svp-iters", "5", "--admm-iters", "30"}));
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("best n_bar=5") != std::string::npos);
  std::istringstream g(slurp(ws / "g.csv"));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(g, line)) ++rows;
  CHECK(rows == 1 + 4);
  CHECK(fs::exists(ws / "tuned.bin"));
  CHECK(run({"eval", "--grid", "--data", te, "--output", ws / "e.csv"}).code == kExitUsage);
}

TEST_CASE("diag on a rank-two label matrix") {
  Workspace ws;
  std::ofstream f(ws / "r2.txt");
  f << "40 4 8\n";
  for (int i = 0; i < 40; ++i) f << (i % 2 ? "0,3,5" : "1,2,3,7") << " 0:1 " << (1 + i % 3) << ":0.5\n";
  f.close();
  const Run r = run({"diag", "--data", ws / "r2.txt", "--l-hats", "1,2", "--output", ws / "d.csv", "--histogram",
                     ws / "h.csv", "--n-bar", "5"});
  REQUIRE(r.code == kExitOk);
  std::istringstream d(slurp(ws / "d.csv"));
  std::string header, row1, row2;
  std::getline(d, header);
  std::getline(d, row1);
  std::getline(d, row2);
  CHECK(header == "l_hat,global_svd_error,nn_objective_error");
  CHECK(row2.rfind("2,0.00000000,", 0) == 0);
  CHECK(row1.rfind("1,0.", 0) == 0);
  CHECK(row1.rfind("1,0.00000000,", 0) != 0);

  std::istringstream h(slurp(ws / "h.csv"));
  std::string line;
  std::getline(h, line);
  CHECK(line == "label,count");
  std::vector<std::string> rows;
  while (std::getline(h, line)) rows.push_back(line);
  REQUIRE(rows.size() == 8);
  CHECK(rows[0] == "0,20");
  CHECK(rows[3] == "3,40");
  CHECK(rows[4] == "4,0");
  CHECK(run({"diag", "--data", ws / "r2.txt", "--l-hats", "9", "--output", ws / "d.csv", "--histogram", ws / "h.csv"})
            .code == kExitUsage);
}

TEST_CASE("every flag is documented") {
  const auto missing = undocumented_flags();
  for (const auto& m : missing) MESSAGE(m);
  CHECK(missing.empty());
}

TEST_CASE("config file values yield to command-line flags") {
  Workspace ws;
  const std::string data = topic_file(ws, "train.txt", 120, 7);
  std::ofstream(ws / "cfg.ini") << "l-hat=4\nn-bar=5\nclusters=1\nk-nn=3\nsvp-iters=5\nadmm-iters=20\nseed=9\n";
  REQUIRE(run({"train", "--config", ws / "cfg.ini", "--data", data, "--model", ws / "a.bin"}).code == kExitOk);
  REQUIRE(run({"train", "--config", ws / "cfg.ini", "--data", data, "--model", ws / "b.bin", "--l-hat", "5"}).code ==
          kExitOk);
  REQUIRE(run({"train", "--data", data, "--model", ws / "c.bin", "--l-hat", "4", "--n-bar", "5", "--clusters", "1",
               "--k-nn", "3", "--svp-iters", "5", "--admm-iters", "20", "--seed", "9"})
              .code == kExitOk);
  CHECK(load_model(fs::path(ws / "a.bin")).hyper.l_hat == 4);
  CHECK(load_model(fs::path(ws / "b.bin")).hyper.l_hat == 5);
  CHECK(slurp(ws / "a.bin") == slurp(ws / "c.bin"));
  std::ofstream(ws / "bad.ini") << "no-such-flag=1\n";
  CHECK(run({"train", "--config", ws / "bad.ini", "--data", data, "--model", ws / "d.bin"}).code == kExitUsage);
}

TEST_CASE("split by fraction and by index file") {
  Workspace ws;
  const std::string data = topic_file(ws, "all.txt", 50, 8);
  REQUIRE(run({"split", "--data", data, "--train-out", ws / "tr.txt", "--test-out", ws / "te.txt", "--train-fraction",
               "0.6", "--seed", "3"})
              .code == kExitOk);
  CHECK(parse_xmc(fs::path(ws / "tr.txt")).num_points() == 30);
  CHECK(parse_xmc(fs::path(ws / "te.txt")).num_points() == 20);

  std::ofstream(ws / "idx.txt") << "1 2\n3 4\n5 6\n";
  REQUIRE(run({"split", "--data", data, "--train-out", ws / "tr2.txt", "--test-out", ws / "te2.txt", "--indices",
               ws / "idx.txt", "--column", "1"})
              .code == kExitOk);
  const Dataset all = parse_xmc(fs::path(data));
  const Dataset tr = parse_xmc(fs::path(ws / "tr2.txt"));
  REQUIRE(tr.num_points() == 3);
  const std::vector<Index> rows{1, 3, 5};
  CHECK(tr.features == all.subset(rows).features);
  CHECK(parse_xmc(fs::path(ws / "te2.txt")).num_points() == 47);
  CHECK(run({"split", "--data", data, "--train-out", ws / "a", "--test-out", ws / "b", "--indices", ws / "idx.txt",
             "--column", "2"})
            .code == kExitUsage);
}

TEST_CASE("the installed binary maps exit codes") {
  const char* exe = std::getenv("LOCALEMBED_CLI");
  if (!exe) {
    MESSAGE("LOCALEMBED_CLI not set; skipping");
    return;
  }
  auto status = [&](const std::string& args) {
    const int raw = std::system(("\"" + std::string(exe) + "\" " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  CHECK(status("--help") == 0);
  CHECK(status("train --clusters 0") == 2);
  CHECK(status("eval --model /nonexistent/m.bin --data /nonexistent/d.txt") == 2);
}
