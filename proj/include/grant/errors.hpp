#pragma once

#include <stdexcept>
#include <string>

namespace grant {

// Exit-code category attached to every error so the CLI can map failures.
enum class ErrorCategory { config = 2, io = 3, training = 4, model = 5 };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

#define GRANT_DEFINE_ERROR(Name, Category)                                   \
  class Name : public Error {                                                \
   public:                                                                   \
    explicit Name(const std::string& what) : Error(Category, what) {}        \
  };

GRANT_DEFINE_ERROR(ConfigError, ErrorCategory::config)
GRANT_DEFINE_ERROR(InputError, ErrorCategory::io)
GRANT_DEFINE_ERROR(IoError, ErrorCategory::io)
GRANT_DEFINE_ERROR(TopologyError, ErrorCategory::model)
GRANT_DEFINE_ERROR(VisibilityError, ErrorCategory::model)
GRANT_DEFINE_ERROR(RoutingError, ErrorCategory::model)
GRANT_DEFINE_ERROR(DomainError, ErrorCategory::model)
GRANT_DEFINE_ERROR(ActionError, ErrorCategory::training)
GRANT_DEFINE_ERROR(DimensionError, ErrorCategory::model)
GRANT_DEFINE_ERROR(GraphError, ErrorCategory::model)
GRANT_DEFINE_ERROR(StateError, ErrorCategory::model)
GRANT_DEFINE_ERROR(TrainingError, ErrorCategory::training)
GRANT_DEFINE_ERROR(ReconfigurationError, ErrorCategory::training)

#undef GRANT_DEFINE_ERROR

}  // namespace grant
