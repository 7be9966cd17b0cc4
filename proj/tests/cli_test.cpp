#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "boxplain/cli.hpp"
#include "boxplain/error.hpp"
#include "boxplain/json.hpp"
#include "helpers.hpp"

namespace boxplain {
namespace {

using testing::TempDir;
using testing::slurp;
using ::testing::HasSubstr;
using ::testing::StartsWith;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string apartments_csv(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> surface(20, 150), year(1920, 2010);
  std::uniform_int_distribution<int> district(0, 3);
  std::normal_distribution<double> noise(0, 50);
  const char* names[] = {"Mokotow", "Ochota", "Praga", "Srodmiescie"};
  std::ostringstream out;
  out << "price,surface,year,district\n";
  for (std::size_t i = 0; i < n; ++i) {
    const double s = std::round(surface(rng));
    const double y = std::round(year(rng));
    const int d = district(rng);
    const double price = 3000 - 10 * s + 0.5 * (y - 1965) * (y - 1965) + 400 * d + noise(rng);
    out << std::round(price) << ',' << s << ',' << y << ',' << names[d] << '\n';
  }
  return out.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override { data = dir.write("apts.csv", apartments_csv(120, 7)); }
  TempDir dir;
  std::string data;
};

TEST_F(Cli, ImportanceTwoModels) {
  const std::string json = dir.file("out.json");
  const Outcome r = run_cli({"importance", "--data", data, "--target", "price", "--model",
                             "builtin:ols", "--label", "lm", "--model", "builtin:tree", "--label",
                             "tree", "--json", json});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(slurp(json));
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0]["kind"], "importance");
  EXPECT_EQ(j[0]["label"], "lm");
  EXPECT_EQ(j[1]["label"], "tree");
}

TEST_F(Cli, UnknownSubcommand) {
  const Outcome r = run_cli({"frobnicate", "--data", data});
  EXPECT_EQ(r.code, 1);
  EXPECT_THAT(r.err, StartsWith("ERROR[1]:"));
  EXPECT_THAT(r.err, HasSubstr("frobnicate"));
  EXPECT_THAT(r.err, HasSubstr("Usage"));
}

TEST_F(Cli, BadFlagsAreUsageErrors) {
  EXPECT_EQ(run_cli({"pdp", "--data", data, "--target", "price", "--model", "builtin:ols"}).code, 1);
  EXPECT_EQ(run_cli({"perf", "--data", data, "--target", "price", "--model", "builtin:magic"}).code,
            1);
  EXPECT_EQ(run_cli({"importance", "--data", data, "--target", "price", "--model", "builtin:ols",
                     "--loss", "huber"})
                .code,
            1);
  EXPECT_EQ(run_cli({"perf", "--data", data, "--target", "price", "--model", "builtin:ols",
                     "--model", "builtin:ols"})
                .code,
            1);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST_F(Cli, FailingCommandModelExitsThree) {
  const Outcome r = run_cli({"perf", "--data", data, "--target", "price", "--model",
                             "cmd:echo 'model broke' >&2; false"});
  EXPECT_EQ(r.code, 3);
  EXPECT_THAT(r.err, StartsWith("ERROR[3]: "));
  EXPECT_THAT(r.err, HasSubstr("model broke"));
  EXPECT_EQ(run_cli({"perf", "--data", data, "--target", "price", "--model", "cmd:false"}).code, 3);
}

TEST_F(Cli, DataErrorsExitTwo) {
  const std::string ragged = dir.write("ragged.csv", "price,x\n1,2\n3\n");
  const Outcome r =
      run_cli({"perf", "--data", ragged, "--target", "price", "--model", "builtin:ols"});
  EXPECT_EQ(r.code, 2);
  EXPECT_THAT(r.err, StartsWith("ERROR[2]:"));
  EXPECT_EQ(run_cli({"perf", "--data", data, "--target", "nope", "--model", "builtin:ols"}).code, 2);
}

TEST_F(Cli, MissingDataFileIsIo) {
  EXPECT_EQ(run_cli({"perf", "--data", dir.file("absent.csv"), "--target", "price", "--model",
                     "builtin:ols"})
                .code,
            4);
}

TEST_F(Cli, RowIndexObservation) {
  const Dataset d = load_csv_file(data, "price");
  const Observation first = cli::parse_observation(d, std::nullopt, 0);
  EXPECT_EQ(first.values(), Observation::from_row(d, 0).values());
  const Dataset three = testing::csv("y,x\n1,2\n3,4\n5,6\n", "y");
  try {
    cli::parse_observation(three, std::nullopt, 5);
    FAIL();
  } catch (const UsageError& err) {
    EXPECT_THAT(err.what(), HasSubstr("index 5 out of range 0..2"));
  }
  const Outcome r = run_cli({"cp", "--data", data, "--target", "price", "--model", "builtin:ols",
                             "--row-index", "500"});
  EXPECT_EQ(r.code, 1);
  EXPECT_THAT(r.err, HasSubstr("index 500 out of range 0..119"));
}

TEST_F(Cli, ObservationFile) {
  const Dataset d = load_csv_file(data, "price");
  const std::string good = dir.write("obs.csv", "district,year,surface\nOchota,1980,55\n");
  const Observation obs = cli::parse_observation(d, good, std::nullopt);
  ASSERT_EQ(obs.size(), 3u);
  EXPECT_EQ(obs.values()[0].first, "surface");
  EXPECT_EQ(std::get<double>(obs.at("surface")), 55.0);
  EXPECT_EQ(std::get<std::string>(obs.at("district")), "Ochota");

  const std::string missing = dir.write("missing.csv", "surface,district\n55,Ochota\n");
  try {
    cli::parse_observation(d, missing, std::nullopt);
    FAIL();
  } catch (const UsageError& err) {
    EXPECT_THAT(err.what(), HasSubstr("'year'"));
  }
  const std::string extra =
      dir.write("extra.csv", "surface,year,district,floor\n55,1980,Ochota,3\n");
  EXPECT_THROW(cli::parse_observation(d, extra, std::nullopt), UsageError);
  const std::string two = dir.write("two.csv", "surface,year,district\n1,2,a\n3,4,b\n");
  EXPECT_THROW(cli::parse_observation(d, two, std::nullopt), UsageError);
  EXPECT_THROW(cli::parse_observation(d, std::nullopt, std::nullopt), UsageError);
  EXPECT_THROW(cli::parse_observation(d, good, 0), UsageError);

  const Outcome r = run_cli({"breakdown", "--data", data, "--target", "price", "--model",
                             "builtin:ols", "--observation", good, "--direction", "down"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_EQ(j[0]["direction"], "down");
}

TEST_F(Cli, EverySubcommandIsByteIdenticalOnRerun) {
  const std::vector<std::vector<std::string>> commands = {
      {"perf", "--log-y"},
      {"pdp", "--variable", "year", "--grid", "uniform:15"},
      {"ale", "--variable", "surface", "--bins", "10"},
      {"merge", "--variable", "district", "--groups", "2"},
      {"importance", "--repeats", "3", "--seed", "11", "--loss", "mae"},
      {"cp", "--row-index", "4", "--variables", "year,district", "--normalize"},
      {"breakdown", "--row-index", "4"},
  };
  for (const auto& command : commands) {
    std::vector<std::string> outputs[2];
    for (int round = 0; round < 2; ++round) {
      const std::string json = dir.file("r" + std::to_string(round) + ".json");
      const std::string svg = dir.file("r" + std::to_string(round) + ".svg");
      std::vector<std::string> args = command;
      for (const std::string& a :
           {"--data", data.c_str(), "--target", "price", "--model", "builtin:ols", "--model",
            "builtin:tree:maxdepth=3,minleaf=5", "--json", json.c_str(), "--svg", svg.c_str(),
            "--jobs", round ? "1" : "4"}) {
        args.push_back(a);
      }
      const Outcome r = run_cli(args);
      ASSERT_EQ(r.code, 0) << command[0] << ": " << r.err;
      outputs[round] = {slurp(json), slurp(svg)};
    }
    EXPECT_EQ(outputs[0], outputs[1]) << command[0];
    EXPECT_FALSE(outputs[0][0].empty());
    EXPECT_THAT(outputs[0][1], HasSubstr("<svg"));
  }
}

TEST_F(Cli, NoPartialFilesOnError) {
  const std::string json = dir.file("out.json");
  const std::string svg = dir.file("out.svg");
  const Outcome r = run_cli({"perf", "--data", data, "--target", "price", "--model", "cmd:false",
                             "--json", json, "--svg", svg});
  EXPECT_EQ(r.code, 3);
  EXPECT_FALSE(std::filesystem::exists(json));
  EXPECT_FALSE(std::filesystem::exists(svg));

  // Second target unwritable: the first must not appear either.
  const Outcome io = run_cli({"perf", "--data", data, "--target", "price", "--model",
                              "builtin:ols", "--json", json, "--svg",
                              dir.file("no/such/dir/out.svg")});
  EXPECT_EQ(io.code, 4);
  EXPECT_THAT(io.err, StartsWith("ERROR[4]:"));
  EXPECT_FALSE(std::filesystem::exists(json));
  for (const auto& entry : std::filesystem::directory_iterator(dir.path())) {
    EXPECT_EQ(entry.path().string().find(".tmp."), std::string::npos) << entry.path();
  }
}

TEST_F(Cli, AtomicWriterReplacesExisting) {
  const std::string path = dir.write("a.txt", "old");
  cli::write_files_atomically({{path, "new"}});
  EXPECT_EQ(slurp(path), "new");
}

TEST_F(Cli, SavedModelAndTrainingFile) {
  const std::string model = dir.file("tree.json");
  ASSERT_EQ(run_cli({"fit", "--data", data, "--target", "price", "--model",
                     "builtin:tree:maxdepth=4", "--out", model})
                .code,
            0);
  const std::string train = dir.write("train.csv", apartments_csv(80, 9));
  const Outcome a = run_cli({"perf", "--data", data, "--target", "price", "--model",
                             "file:" + model, "--label", "t"});
  ASSERT_EQ(a.code, 0) << a.err;
  const Outcome b = run_cli({"perf", "--data", data, "--target", "price", "--train", data,
                             "--model", "builtin:tree:maxdepth=4", "--label", "t"});
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(a.out, b.out);
  const Outcome c = run_cli({"perf", "--data", data, "--target", "price", "--train", train,
                             "--model", "builtin:tree:maxdepth=4", "--label", "t"});
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_NE(a.out, c.out);

  const std::string other = dir.write("other.csv", "price,a\n1,2\n3,4\n5,7\n");
  EXPECT_EQ(run_cli({"perf", "--data", other, "--target", "price", "--model", "file:" + model})
                .code,
            1);
}

TEST(ModelSpec, Parse) {
  EXPECT_EQ(cli::ModelSpec::parse("builtin:ols").scheme, cli::ModelSpec::Scheme::Ols);
  const auto tree = cli::ModelSpec::parse("builtin:tree:maxdepth=2,minleaf=7");
  EXPECT_EQ(tree.max_depth, 2);
  EXPECT_EQ(tree.min_leaf, 7);
  EXPECT_EQ(cli::ModelSpec::parse("builtin:tree").max_depth, cli::kDefaultTreeDepth);
  EXPECT_EQ(cli::ModelSpec::parse("cmd:python3 m.py").argument, "python3 m.py");
  EXPECT_EQ(cli::ModelSpec::parse("http:http://h:1/p").argument, "http://h:1/p");
  EXPECT_THROW(cli::ModelSpec::parse("builtin:tree:depth=2"), UsageError);
  EXPECT_THROW(cli::ModelSpec::parse("cmd:"), UsageError);
  EXPECT_THROW(cli::ModelSpec::parse("ftp:x"), UsageError);
}

}  // namespace
}  // namespace boxplain
