#pragma once

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace xsib::acceptance {

/// One measured quantity against its pinned bound.
struct Check {
  std::string what;
  bool pass = false;
  std::string detail;
};

class Outcome {
 public:
  void check(const std::string& what, bool pass, const std::string& detail) { checks_.push_back({what, pass, detail}); }

  /// measured < bound
  void below(const std::string& what, double measured, double bound) {
    check(what, measured < bound, fmt(measured) + " < " + fmt(bound));
  }
  void at_most(const std::string& what, double measured, double bound) {
    check(what, measured <= bound, fmt(measured) + " <= " + fmt(bound));
  }
  void at_least(const std::string& what, double measured, double bound) {
    check(what, measured >= bound, fmt(measured) + " >= " + fmt(bound));
  }
  void above(const std::string& what, double measured, double bound) {
    check(what, measured > bound, fmt(measured) + " > " + fmt(bound));
  }
  void equal(const std::string& what, double measured, double expected) {
    check(what, measured == expected, fmt(measured) + " == " + fmt(expected));
  }
  void note(const std::string& text) { notes_.push_back(text); }

  bool pass() const {
    for (const auto& c : checks_)
      if (!c.pass) return false;
    return !checks_.empty();
  }
  const std::vector<Check>& checks() const { return checks_; }
  const std::vector<std::string>& notes() const { return notes_; }

  static std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
  }

 private:
  std::vector<Check> checks_;
  std::vector<std::string> notes_;
};

struct Criterion {
  std::string id;
  std::string title;
  double budget_s;  // wall-clock bound; <= 0 for none
  std::function<void(Outcome&)> run;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace xsib::acceptance
