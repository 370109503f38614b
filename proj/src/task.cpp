#include "selnet/task.hpp"

#include "selnet/error.hpp"

namespace selnet {

std::string to_string(const Task& task) {
  if (task.is_classification()) {
    return "classification:" + std::to_string(task.num_classes);
  }
  return "regression";
}

Task parse_task(const std::string& text) {
  if (text == "regression") return Task::regression();
  const std::string prefix = "classification:";
  if (text.rfind(prefix, 0) == 0) {
    try {
      std::size_t used = 0;
      const std::string digits = text.substr(prefix.size());
      const unsigned long k = std::stoul(digits, &used);
      if (used == digits.size() && k >= 2) return Task::classification(k);
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("unrecognized task '" + text + "'");
}

}  // namespace selnet
