#pragma once

#include <stdexcept>
#include <string>

namespace fuzzydose {

class DefinitionError : public std::runtime_error {
  public:
    explicit DefinitionError(const std::string& message) : std::runtime_error(message) {}
};

class ParseError : public std::runtime_error {
  public:
    ParseError(int line, int column, const std::string& message)
        : std::runtime_error("line " + std::to_string(line) + ", column " +
                             std::to_string(column) + ": " + message),
          line_(line),
          column_(column) {}

    int line() const { return line_; }
    int column() const { return column_; }

  private:
    int line_;
    int column_;
};

class SensorFault : public std::runtime_error {
  public:
    explicit SensorFault(const std::string& message) : std::runtime_error(message) {}
};

class OverflowFault : public std::runtime_error {
  public:
    explicit OverflowFault(const std::string& message) : std::runtime_error(message) {}
};

}  // namespace fuzzydose
