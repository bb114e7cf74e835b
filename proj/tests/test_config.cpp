#include <doctest.h>

#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include "weyllab/config.hpp"
#include "weyllab/orchestrate.hpp"
#include "weyllab/toml_lite.hpp"

using namespace weyllab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() /
                     ("weyllab-test-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct CliResult {
  int status = -1;
  std::string out;
};

CliResult cli(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt";
  const std::string cmd = std::string(WEYLLAB_CLI) + " " + args + " > " + out.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  CliResult r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out);
  return r;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
}

int count_lines(const fs::path& p) {
  std::ifstream is(p);
  int n = 0;
  std::string line;
  while (std::getline(is, line)) ++n;
  return n;
}

const char* kWeylHeader =
    "[run]\nexperiment = \"weyl\"\nseed = 1\n"
    "[model]\nname = \"schrodinger_cos\"\n"
    "[gamma]\nre = [0.37, 2.23]\nim = [-0.46, 0.43]\n"
    "[schedule]\nL = 3.0\n";

}  // namespace

TEST_CASE("toml subset parses scalars, tables and multiline arrays") {
  const auto doc = parse_toml(
      "# comment\n"
      "top = 1\n"
      "[a]\n"
      "i = -42\n"
      "f = 1.5e-3  # trailing\n"
      "s = \"x # not a comment\"\n"
      "flag = true\n"
      "inf_value = inf\n"
      "arr = [\n  1.0,\n  2.0,\n]\n"
      "[a.b]\n"
      "\"quoted key\" = \"v\"\n"
      "c.d = 3\n");
  CHECK(doc["top"].get<long long>() == 1);
  CHECK(doc["a"]["i"].is_number_integer());
  CHECK(doc["a"]["i"].get<long long>() == -42);
  CHECK(doc["a"]["f"].is_number_float());
  CHECK(doc["a"]["f"].get<double>() == 1.5e-3);
  CHECK(doc["a"]["s"] == "x # not a comment");
  CHECK(doc["a"]["flag"] == true);
  CHECK(std::isinf(doc["a"]["inf_value"].get<double>()));
  CHECK(doc["a"]["arr"].size() == 2);
  CHECK(doc["a"]["b"]["quoted key"] == "v");
  CHECK(doc["a"]["b"]["c"]["d"].get<long long>() == 3);
}

TEST_CASE("toml errors carry line numbers") {
  try {
    parse_toml("a = 1\nb = \n");
    FAIL("expected a parse error");
  } catch (const TomlError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_toml("a = 1\na = 2\n"), TomlError);
  CHECK_THROWS_AS(parse_toml("[t\n"), TomlError);
  CHECK_THROWS_AS(parse_toml("s = \"open\n"), TomlError);
}

TEST_CASE("toml dump round-trips") {
  const nlohmann::json doc = {{"x", {{"f", 0.1}, {"i", 3}, {"s", "q"}, {"arr", {1.0, 2.5}}}},
                              {"y", {{"z", {{"flag", false}}}}}};
  const auto back = parse_toml(dump_toml(doc));
  CHECK(back == doc);
  CHECK(format_double(2.0) == "2.0");
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(std::stod(format_double(1e-300)) == 1e-300);
}

TEST_CASE("valid config echo matches the golden file") {
  const RunPlan plan = load_config(std::string(WEYLLAB_TEST_DATA) + "/valid_weyl.toml");
  CHECK(plan.experiment == "weyl");
  CHECK(plan.seed == 12);
  CHECK(plan.weyl.h_values == std::vector<double>{0.1, 0.05});
  CHECK(plan.echo() == slurp(std::string(WEYLLAB_TEST_DATA) + "/valid_weyl.echo.toml"));
  // the echo is itself a valid config with the same echo
  CHECK(load_config_text(plan.echo()).echo() == plan.echo());
}

TEST_CASE("invalid configs report every problem at once") {
  try {
    load_config_text(
        "[run]\nexperiment = \"weyl\"\nbogus = 1\n"
        "[schedule]\nM = 0.1\n"
        "[draws]\ncount = -1\n"
        "[renorm]\ndim = 4\n");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    const auto& errs = e.errors();
    auto has = [&](const std::string& s) {
      for (const auto& m : errs) {
        if (m.find(s) != std::string::npos) return true;
      }
      return false;
    };
    CHECK(has("[run].bogus: unknown key"));
    CHECK(has("violated M >= (3n-kappa)/(s-n/2-eps)"));
    CHECK(has("[draws].count"));
    CHECK(has("[renorm]: not used by experiment 'weyl'"));
    CHECK(errs.size() >= 4);
  }
  CHECK_THROWS_AS(load_config_text("[run]\nexperiment = \"other\"\n"), ConfigError);
  CHECK_THROWS_AS(load_config_text("[run]\nexperiment = \"renorm\"\n[renorm]\ntheta = 0.3\n"),
                  ConfigError);
  CHECK_THROWS_AS(load_config_text("[run\n"), ConfigError);
}

TEST_CASE("config hash depends on the normalized content only") {
  const RunPlan a = load_config_text("[run]\nexperiment = \"counterexample\"\nseed = 3\n");
  const RunPlan b = load_config_text("# same run\n[run]\nseed = 3\nexperiment = \"counterexample\"\n");
  const RunPlan c = load_config_text("[run]\nexperiment = \"counterexample\"\nseed = 4\n");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(c));
  CHECK(config_hash(a).size() == 16);
}

TEST_CASE("run directories are never reused") {
  const fs::path root = scratch("dirs");
  const std::string a = create_run_directory(root.string(), "abc", 5);
  const std::string b = create_run_directory(root.string(), "abc", 5);
  CHECK(fs::path(a).filename() == "abc-s5");
  CHECK(fs::path(b).filename() == "abc-s5-1");
  fs::remove_all(root);
}

TEST_CASE("cli validate and exit codes") {
  const fs::path dir = scratch("cli");
  const CliResult ok = cli("validate " + std::string(WEYLLAB_TEST_DATA) + "/valid_weyl.toml", dir);
  CHECK(ok.status == 0);
  CHECK(ok.out == slurp(std::string(WEYLLAB_TEST_DATA) + "/valid_weyl.echo.toml"));

  write(dir / "bad.toml", "[run]\nexperiment = \"weyl\"\nbogus = 1\n");
  const CliResult bad = cli("validate " + (dir / "bad.toml").string(), dir);
  CHECK(bad.status == 2);
  CHECK(bad.out.find("[run].bogus: unknown key") != std::string::npos);

  write(dir / "fail.toml",
        "[run]\nexperiment = \"renorm\"\n[renorm]\ndim = 64\nn_small = 6\nn1_lab = 30.0\n"
        "max_retries = 0\n");
  const CliResult fail = cli("run " + (dir / "fail.toml").string() + " --out " +
                                 (dir / "runs").string(), dir);
  CHECK(fail.status == 3);
  CHECK(fail.out.find("certificate failure") != std::string::npos);

  const CliResult missing = cli("validate " + (dir / "nope.toml").string(), dir);
  CHECK(missing.status == 2);
  const CliResult map = cli("paper-map", dir);
  CHECK(map.status == 0);
  CHECK(map.out.find("renorm") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("run with an empty draw list writes a complete run directory") {
  const fs::path dir = scratch("empty");
  write(dir / "empty.toml", std::string(kWeylHeader) + "[draws]\ncount = 0\nh = [0.1]\n");
  const CliResult r = cli("run " + (dir / "empty.toml").string() + " --out " +
                              (dir / "runs").string(), dir);
  REQUIRE(r.status == 0);
  const fs::path run = r.out.substr(0, r.out.find('\n'));
  CHECK(fs::exists(run / "manifest.json"));
  CHECK(fs::exists(run / "report.json"));
  CHECK(fs::exists(run / "config.toml"));
  // only the delta = 0 control is recorded
  CHECK(count_lines(run / "draws.jsonl") == 1);
  const auto summary = summarize_run(run.string());
  CHECK(summary["status"] == "complete");
  CHECK(summary["draw_records"] == 1);
  CHECK(summary["malformed_records"] == 0);
  // the stored config reproduces the run plan
  CHECK(load_config((run / "config.toml").string()).echo() ==
        load_config((dir / "empty.toml").string()).echo());
  fs::remove_all(dir);
}

TEST_CASE("a killed run leaves a readable partial directory") {
  const fs::path dir = scratch("kill");
  write(dir / "long.toml", std::string(kWeylHeader) + "[draws]\ncount = 400\nh = [0.02]\n");
  const fs::path runs = dir / "runs";
  const pid_t pid = ::fork();
  REQUIRE(pid >= 0);
  if (pid == 0) {
    const std::string cfg = (dir / "long.toml").string();
    const std::string out = runs.string();
    const int devnull = ::open("/dev/null", O_WRONLY);
    ::dup2(devnull, STDOUT_FILENO);
    ::execl(WEYLLAB_CLI, WEYLLAB_CLI, "run", cfg.c_str(), "--out", out.c_str(),
            static_cast<char*>(nullptr));
    std::_Exit(127);
  }
  fs::path run;
  const auto start = std::chrono::steady_clock::now();
  while (std::chrono::steady_clock::now() - start < std::chrono::seconds(120)) {
    if (fs::exists(runs)) {
      for (const auto& e : fs::directory_iterator(runs)) run = e.path();
    }
    if (!run.empty() && fs::exists(run / "draws.jsonl") && count_lines(run / "draws.jsonl") >= 4) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  ::kill(pid, SIGKILL);
  int status = 0;
  ::waitpid(pid, &status, 0);
  REQUIRE_FALSE(run.empty());
  const auto summary = summarize_run(run.string());
  CHECK(summary["status"] == "incomplete");
  CHECK(summary["has_report"] == false);
  CHECK(summary["draw_records"].get<int>() >= 4);
  CHECK(summary["malformed_records"].get<int>() <= 1);
  const CliResult rep = cli("report " + run.string(), dir);
  CHECK(rep.status == 0);
  CHECK(rep.out.find("incomplete") != std::string::npos);
  fs::remove_all(dir);
}
