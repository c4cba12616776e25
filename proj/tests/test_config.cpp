#include <doctest.h>

#include <nlohmann/json.hpp>

#include "hazegan/config.hpp"
#include "hazegan/errors.hpp"

using namespace hazegan;

TEST_CASE("width list parsing") {
  CHECK(parse_width_list("64,128,256,512") == std::vector<int>{64, 128, 256, 512});
  CHECK(parse_width_list("16") == std::vector<int>{16});
  CHECK_THROWS_AS(parse_width_list(""), InvalidParameterError);
  CHECK_THROWS_AS(parse_width_list("64,abc"), InvalidParameterError);
  CHECK_THROWS_AS(parse_width_list("64,-3"), InvalidParameterError);
}

TEST_CASE("exit codes follow the documented taxonomy") {
  CHECK(exit_code_for(InvalidParameterError("x")) == 1);
  CHECK(exit_code_for(ConfigurationError("x")) == 1);
  CHECK(exit_code_for(DataError("x")) == 2);
  CHECK(exit_code_for(ShapeError("x")) == 2);
  CHECK(exit_code_for(IntegrityError("x")) == 2);
  CHECK(exit_code_for(IncompatibleCheckpointError("x")) == 2);
  CHECK(exit_code_for(NumericError("x")) == 3);
  CHECK(exit_code_for(Error("x")) == 3);
}

TEST_CASE("train log records serialize to one json object per line") {
  TrainLogRecord rec;
  rec.step = 42;
  rec.epoch = 3;
  rec.critic_objective = -1.25;
  rec.generator_objective = 8.5;
  rec.gradient_penalty = 0.125;
  rec.wasserstein = 2.0;
  rec.time_s = 12.5;
  const std::string line = train_log_jsonl(rec);
  CHECK(line.find('\n') == std::string::npos);
  const auto j = nlohmann::json::parse(line);
  CHECK(j.at("step") == 42);
  CHECK(j.at("epoch") == 3);
  CHECK(j.at("critic_objective") == -1.25);
  CHECK(j.at("generator_objective") == 8.5);
  CHECK(j.at("gradient_penalty") == 0.125);
  CHECK(j.at("wasserstein") == 2.0);
}
