#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <cstdlib>
#include <random>

#include "boxplain/adapters.hpp"
#include "boxplain/error.hpp"
#include "fixtures/sum_server.hpp"
#include "helpers.hpp"

namespace boxplain {
namespace {

using testing::csv;
using testing::vec;
using ::testing::ElementsAre;
using ::testing::HasSubstr;
using ::testing::StartsWith;

SubprocessModelSpec fixture(const std::string& mode = "sum") {
  SubprocessModelSpec spec;
  spec.command = {BOXPLAIN_SUM_MODEL, mode};
  spec.timeout_ms = 10000;
  return spec;
}

Eigen::VectorXd in_process_sum(const Dataset& q) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q.rows()));
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < q.cols(); ++c) {
      if (q.column(c).is_numeric()) s += q.column(c).numeric()[i];
    }
    out[i] = s;
  }
  return out;
}

Dataset random_query(std::size_t rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return testing::random_dataset(rng, rows, 3, true).features();
}

template <typename F>
std::string adapter_message(F&& f) {
  try {
    f();
  } catch (const ModelAdapterError& e) {
    return e.what();
  }
  return "<no ModelAdapterError>";
}

TEST(Subprocess, ConstantChild) {
  const Dataset q = csv("x\n1\n2\n3\n");
  EXPECT_EQ(subprocess_predict(fixture("const"), q), vec({1.5, 1.5, 1.5}));
  EXPECT_EQ(subprocess_predict(SubprocessModelSpec::shell("sed 1d | sed 's/.*/1.5/'"), q),
            vec({1.5, 1.5, 1.5}));
}

TEST(Subprocess, NonzeroExitCarriesStderr) {
  const std::string message =
      adapter_message([] { subprocess_predict(fixture("fail"), csv("x\n1\n")); });
  EXPECT_THAT(message, StartsWith("model process exited with status 2"));
  EXPECT_THAT(message, HasSubstr("fixture: model exploded"));
}

TEST(Subprocess, ShortOutput) {
  EXPECT_THAT(adapter_message([] { subprocess_predict(fixture("short"), csv("x\n1\n2\n3\n")); }),
              StartsWith("expected 3 predictions, got 2"));
}

TEST(Subprocess, UnparsableLine) {
  EXPECT_THAT(adapter_message([] { subprocess_predict(fixture("garbage"), csv("x\n1\n2\n")); }),
              StartsWith("line 1: cannot parse"));
}

TEST(Subprocess, Timeout) {
  SubprocessModelSpec spec = fixture("sleep");
  spec.timeout_ms = 200;
  EXPECT_THAT(adapter_message([&] { subprocess_predict(spec, csv("x\n1\n")); }),
              StartsWith("model process timed out after 200 ms"));
}

TEST(Subprocess, MissingProgram) {
  SubprocessModelSpec spec;
  spec.command = {"/nonexistent/model-binary"};
  EXPECT_THAT(adapter_message([&] { subprocess_predict(spec, csv("x\n1\n")); }),
              StartsWith("cannot start '/nonexistent/model-binary'"));
}

TEST(Subprocess, RoundTripMatchesInProcess) {
  const Dataset q = random_query(1000, 21);
  EXPECT_EQ(subprocess_predict(fixture(), q), in_process_sum(q));
}

TEST(Subprocess, EnvironmentOverridesTimeout) {
  ::setenv("BOXPLAIN_ADAPTER_TIMEOUT_MS", "1234", 1);
  EXPECT_EQ(default_adapter_timeout_ms(), 1234);
  EXPECT_EQ(SubprocessModelSpec{}.timeout_ms, 1234);
  ::setenv("BOXPLAIN_ADAPTER_TIMEOUT_MS", "junk", 1);
  EXPECT_EQ(default_adapter_timeout_ms(), 30000);
  ::unsetenv("BOXPLAIN_ADAPTER_TIMEOUT_MS");
  EXPECT_EQ(default_adapter_timeout_ms(), 30000);
}

TEST(Subprocess, NotReentrant) { EXPECT_FALSE(subprocess_model(fixture()).reentrant); }

class Http : public ::testing::Test {
 protected:
  HttpModelSpec spec() const {
    HttpModelSpec s;
    s.url = server.url();
    s.timeout_ms = 10000;
    return s;
  }
  testing::SumServer server;
};

TEST_F(Http, SumsRows) {
  EXPECT_EQ(http_predict(spec(), csv("a,b\n1,2\n3,4\n")), vec({3, 7}));
  EXPECT_TRUE(http_model(spec()).reentrant);
}

TEST_F(Http, RequestBodyShape) {
  const Json body = Json::parse(http_request_body(csv("a,d\n1.5,x\n2,y\n")));
  EXPECT_EQ(body["columns"], Json::array({"a", "d"}));
  EXPECT_EQ(body["kinds"], Json::array({"numeric", "categorical"}));
  EXPECT_EQ(body["rows"], Json::parse(R"([[1.5,"x"],[2,"y"]])"));
}

TEST_F(Http, BatchesInOrder) {
  const Dataset q = random_query(2500, 22);
  server.reset();
  EXPECT_EQ(http_predict(spec(), q), in_process_sum(q));
  EXPECT_THAT(server.batch_sizes(), ElementsAre(1024, 1024, 452));
}

TEST_F(Http, BatchingIsInvisible) {
  const Dataset q = random_query(300, 23);
  const Eigen::VectorXd reference = http_predict(spec(), q);
  for (std::size_t batch : {1, 7, 64, 299, 300, 5000}) {
    HttpModelSpec s = spec();
    s.max_batch = batch;
    EXPECT_EQ(http_predict(s, q), reference);
  }
}

TEST_F(Http, RoundTripMatchesInProcess) {
  const Dataset q = random_query(1000, 24);
  EXPECT_EQ(http_predict(spec(), q), in_process_sum(q));
}

TEST_F(Http, ProtocolErrors) {
  const Dataset q = csv("a\n1\n2\n");
  server.set_mode(testing::SumServer::Mode::Status500);
  EXPECT_THAT(adapter_message([&] { http_predict(spec(), q); }),
              AllOf(StartsWith("POST " + server.url() + " returned status 500"),
                    HasSubstr("internal trouble")));
  server.set_mode(testing::SumServer::Mode::Malformed);
  EXPECT_THAT(adapter_message([&] { http_predict(spec(), q); }), HasSubstr("malformed JSON"));
  server.set_mode(testing::SumServer::Mode::WrongCount);
  EXPECT_THAT(adapter_message([&] { http_predict(spec(), q); }),
              StartsWith("expected 2 predictions, got 3"));
  server.set_mode(testing::SumServer::Mode::NotNumber);
  EXPECT_THAT(adapter_message([&] { http_predict(spec(), q); }),
              StartsWith("prediction 1 is not a number"));
  server.set_mode(testing::SumServer::Mode::Slow);
  HttpModelSpec fast = spec();
  fast.timeout_ms = 200;
  EXPECT_THAT(adapter_message([&] { http_predict(fast, q); }),
              HasSubstr("timeout or connection failure"));
}

TEST_F(Http, HeadersArePassedThrough) {
  HttpModelSpec s = spec();
  s.headers = {{"Authorization", "Bearer abc"}};
  http_predict(s, csv("a\n1\n"));
  const auto headers = server.last_headers();
  ASSERT_EQ(headers.count("Authorization"), 1u);
  EXPECT_EQ(headers.find("Authorization")->second, "Bearer abc");
}

TEST(HttpSpec, Validation) {
  HttpModelSpec s;
  s.url = "https://example.com/predict";
  EXPECT_THROW(validate(s), UsageError);
  s.url = "http://127.0.0.1:99999/x";
  EXPECT_THROW(validate(s), UsageError);
  s.url = "http://localhost:8080/v1/predict";
  EXPECT_NO_THROW(validate(s));
}

TEST(HttpSpec, ConnectionRefused) {
  HttpModelSpec s;
  // Port 1 on loopback is closed in any sane environment.
  s.url = "http://127.0.0.1:1/predict";
  s.timeout_ms = 1000;
  EXPECT_THAT(adapter_message([&] { http_predict(s, csv("a\n1\n")); }),
              StartsWith("POST http://127.0.0.1:1/predict:"));
}

}  // namespace
}  // namespace boxplain
