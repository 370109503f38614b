#pragma once

#include <cstddef>
#include <string>

namespace selnet {

enum class TaskKind { Regression, Classification };

struct Task {
  TaskKind kind = TaskKind::Regression;
  // Meaningful for classification only.
  std::size_t num_classes = 0;

  static Task regression() { return {TaskKind::Regression, 0}; }
  static Task classification(std::size_t k) {
    return {TaskKind::Classification, k};
  }

  bool is_classification() const { return kind == TaskKind::Classification; }
  std::size_t output_width() const {
    return is_classification() ? num_classes : 1;
  }
  bool operator==(const Task&) const = default;
};

std::string to_string(const Task& task);
/// Parses "regression" or "classification:<k>".
Task parse_task(const std::string& text);

}  // namespace selnet
