#include <charconv>
#include <cstdio>
#include <sstream>

#include "clfp/errors.hpp"
#include "clfp/training.hpp"

namespace clfp {

namespace {

constexpr std::string_view kHeader = "epoch,split,loss,accuracy,precision,recall,auc";

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(std::string_view s, std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError("metrics csv line " + std::to_string(line_no) + ": bad number '" +
                      std::string(s) + "'");
  }
  return v;
}

}  // namespace

std::string TrainLog::to_csv() const {
  std::string out(kHeader);
  out += '\n';
  char buf[256];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%zu,%s,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.epoch,
                  std::string(to_string(r.split)).c_str(), r.loss, r.accuracy, r.precision,
                  r.recall, r.auc);
    out += buf;
  }
  return out;
}

TrainLog TrainLog::from_csv(std::string_view text) {
  TrainLog log;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!header_seen) {
      if (line != kHeader) throw FormatError("metrics csv: unexpected header '" + std::string(line) + "'");
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 7) {
      throw FormatError("metrics csv line " + std::to_string(line_no) + ": expected 7 fields");
    }
    EpochRecord r;
    const double epoch = parse_double(f[0], line_no);
    if (epoch < 1 || epoch != static_cast<double>(static_cast<std::size_t>(epoch))) {
      throw FormatError("metrics csv line " + std::to_string(line_no) + ": bad epoch");
    }
    r.epoch = static_cast<std::size_t>(epoch);
    if (f[1] == "train") r.split = SplitKind::train;
    else if (f[1] == "val") r.split = SplitKind::val;
    else throw FormatError("metrics csv line " + std::to_string(line_no) + ": bad split");
    r.loss = parse_double(f[2], line_no);
    r.accuracy = parse_double(f[3], line_no);
    r.precision = parse_double(f[4], line_no);
    r.recall = parse_double(f[5], line_no);
    r.auc = parse_double(f[6], line_no);
    log.records.push_back(r);
  }
  if (!header_seen) throw FormatError("metrics csv: missing header");
  return log;
}

}  // namespace clfp
