#pragma once

#include <string>
#include <vector>

#include "hazegan/trainer.hpp"

namespace hazegan {

// "64,128,256,512" -> {64,128,256,512}
std::vector<int> parse_width_list(const std::string& csv);

// Exit code taxonomy: 0 success, 1 usage, 2 data, 3 runtime/numeric.
int exit_code_for(const std::exception& e);

// One JSON object per line, append-friendly.
std::string train_log_jsonl(const TrainLogRecord& record);

}  // namespace hazegan
