#include "hazegan/config.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

#include "hazegan/errors.hpp"

namespace hazegan {

std::vector<int> parse_width_list(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw InvalidParameterError("bad width list entry: '" + item + "'");
    }
  }
  if (out.empty()) throw InvalidParameterError("width list is empty");
  return out;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InvalidParameterError*>(&e) ||
      dynamic_cast<const ConfigurationError*>(&e)) {
    return 1;
  }
  if (dynamic_cast<const DataError*>(&e)) return 2;
  return 3;
}

std::string train_log_jsonl(const TrainLogRecord& r) {
  nlohmann::json j;
  j["step"] = r.step;
  j["epoch"] = r.epoch;
  j["critic_objective"] = r.critic_objective;
  j["generator_objective"] = r.generator_objective;
  j["gradient_penalty"] = r.gradient_penalty;
  j["wasserstein"] = r.wasserstein;
  j["time_s"] = r.time_s;
  return j.dump();
}

}  // namespace hazegan
