#pragma once

#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "finsler/geodesics.hpp"
#include "finsler/structure.hpp"

namespace finsler {

/// Deterministic JSON emitter: insertion-ordered keys, all numbers printed
/// with 17 significant digits so reports are diff-stable.
class JsonWriter {
public:
  std::string str() const { return out_; }

  JsonWriter& begin_object() {
    comma();
    out_ += '{';
    fresh_ = true;
    return *this;
  }
  JsonWriter& end_object() {
    out_ += '}';
    fresh_ = false;
    return *this;
  }
  JsonWriter& begin_array() {
    comma();
    out_ += '[';
    fresh_ = true;
    return *this;
  }
  JsonWriter& end_array() {
    out_ += ']';
    fresh_ = false;
    return *this;
  }
  JsonWriter& key(const std::string& k) {
    comma();
    out_ += '"' + escape(k) + "\":";
    pending_value_ = true;
    return *this;
  }
  JsonWriter& value(const std::string& v) {
    comma();
    out_ += '"' + escape(v) + '"';
    return *this;
  }
  JsonWriter& value(const char* v) { return value(std::string(v)); }
  JsonWriter& value(double v) {
    comma();
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out_ += buf;
    return *this;
  }
  JsonWriter& value(long long v) {
    comma();
    out_ += std::to_string(v);
    return *this;
  }
  JsonWriter& value(std::size_t v) { return value(static_cast<long long>(v)); }
  JsonWriter& value(int v) { return value(static_cast<long long>(v)); }
  JsonWriter& value(bool v) {
    comma();
    out_ += v ? "true" : "false";
    return *this;
  }
  JsonWriter& number_array(std::span<const double> v) {
    begin_array();
    for (double x : v) value(x);
    end_array();
    return *this;
  }

private:
  void comma() {
    if (pending_value_) {
      pending_value_ = false;
      return;
    }
    if (!fresh_ && !out_.empty() && out_.back() != '{' && out_.back() != '[')
      out_ += ',';
    fresh_ = false;
  }
  static std::string escape(const std::string& s) {
    std::string o;
    for (char c : s) {
      switch (c) {
        case '"': o += "\\\""; break;
        case '\\': o += "\\\\"; break;
        case '\n': o += "\\n"; break;
        case '\t': o += "\\t"; break;
        default: o += c;
      }
    }
    return o;
  }

  std::string out_;
  bool fresh_ = true;
  bool pending_value_ = false;
};

inline void write_checks(JsonWriter& w, const std::vector<IdentityCheck>& checks) {
  w.key("checks").begin_array();
  for (const auto& c : checks) {
    w.begin_object();
    w.key("name").value(c.name);
    w.key("residual").value(c.max_residual);
    w.key("tolerance").value(c.tolerance);
    w.key("samples").value(c.samples);
    w.key("skipped").value(c.skipped);
    w.key("status").value(c.pass ? "pass" : "fail");
    w.end_object();
  }
  w.end_array();
}

/// Trajectory CSV: header exactly t,x0..x{n-1},y0..y{n-1},F; \n newlines;
/// 17 significant digits.
inline void write_path_csv(std::ostream& os, const GeodesicPath& path, int n) {
  os << "t";
  for (int i = 0; i < n; ++i) os << ",x" << i;
  for (int i = 0; i < n; ++i) os << ",y" << i;
  os << ",F\n";
  char buf[40];
  for (const auto& s : path.samples) {
    std::snprintf(buf, sizeof buf, "%.17g", s.t);
    os << buf;
    for (int i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", s.x[i]);
      os << ',' << buf;
    }
    for (int i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", s.y[i]);
      os << ',' << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", s.F);
    os << ',' << buf << '\n';
  }
}

}  // namespace finsler
