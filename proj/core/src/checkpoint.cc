//
// Copyright 2026 The dpfl-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "dpfl/checkpoint.h"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>

namespace dpfl {
namespace {

constexpr char kCheckpointMagic[8] = {'D', 'P', 'F', 'L', 'C', 'K', 'P', 'T'};
constexpr char kReportMagic[8] = {'D', 'P', 'F', 'L', 'R', 'L', 'O', 'G'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw FormatError("cannot open '" + path.string() + "' for writing");
  }
  void Bytes(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }
  void U32(std::uint32_t v) { Le(v, 4); }
  void U64(std::uint64_t v) { Le(v, 8); }
  void F64(double v) { U64(std::bit_cast<std::uint64_t>(v)); }
  void Finish() {
    out_.flush();
    if (!out_) throw FormatError("write failed");
  }

 private:
  void Le(std::uint64_t v, int bytes) {
    std::array<char, 8> b{};
    for (int i = 0; i < bytes; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>(v >> (8 * i));
    out_.write(b.data(), bytes);
  }
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path)
      : in_(path, std::ios::binary), name_(path.filename().string()) {
    if (!in_) throw FormatError("cannot open '" + path.string() + "'");
  }
  void Bytes(char* data, std::size_t n, const char* field) {
    in_.read(data, static_cast<std::streamsize>(n));
    if (!in_) throw FormatError(name_ + ": truncated while reading " + field);
  }
  std::uint32_t U32(const char* field) { return static_cast<std::uint32_t>(Le(4, field)); }
  std::uint64_t U64(const char* field) { return Le(8, field); }
  double F64(const char* field) { return std::bit_cast<double>(U64(field)); }
  void ExpectMagic(const char (&magic)[8]) {
    char buf[8];
    Bytes(buf, 8, "magic");
    if (std::memcmp(buf, magic, 8) != 0) throw FormatError(name_ + ": bad magic");
    if (U32("version") != kVersion) throw FormatError(name_ + ": unsupported version");
  }
  const std::string& name() const { return name_; }

 private:
  std::uint64_t Le(int bytes, const char* field) {
    std::array<unsigned char, 8> b{};
    in_.read(reinterpret_cast<char*>(b.data()), bytes);
    if (!in_) throw FormatError(name_ + ": truncated while reading " + field);
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= std::uint64_t{b[static_cast<std::size_t>(i)]} << (8 * i);
    return v;
  }
  std::ifstream in_;
  std::string name_;
};

}  // namespace

void WriteCheckpoint(const std::filesystem::path& path, const ModelSpec& spec,
                     const ParameterVector& params) {
  if (ParameterVector::Zeros(spec).layout() != params.layout()) {
    throw ShapeError("checkpoint: parameters do not match " + spec.Descriptor());
  }
  Writer w(path);
  w.Bytes(kCheckpointMagic, 8);
  w.U32(kVersion);
  const std::string descriptor = spec.Descriptor();
  w.U32(static_cast<std::uint32_t>(descriptor.size()));
  w.Bytes(descriptor.data(), descriptor.size());
  w.U64(static_cast<std::uint64_t>(params.dim()));
  w.U64(static_cast<std::uint64_t>(params.head_range().begin));
  w.U64(static_cast<std::uint64_t>(params.head_range().end));
  for (Index i = 0; i < params.dim(); ++i) w.F64(params.values()(i));
  w.Finish();
}

Checkpoint ReadCheckpoint(const std::filesystem::path& path) {
  Reader r(path);
  r.ExpectMagic(kCheckpointMagic);
  const std::uint32_t len = r.U32("descriptor length");
  if (len > 4096) throw FormatError(r.name() + ": descriptor too long");
  std::string descriptor(len, '\0');
  r.Bytes(descriptor.data(), len, "descriptor");
  const ModelSpec spec = ModelSpec::FromDescriptor(descriptor);
  ParameterVector params = ParameterVector::Zeros(spec);
  const std::uint64_t d = r.U64("d");
  const std::uint64_t head_begin = r.U64("head_begin");
  const std::uint64_t head_end = r.U64("head_end");
  if (d != static_cast<std::uint64_t>(params.dim()) ||
      head_begin != static_cast<std::uint64_t>(params.head_range().begin) ||
      head_end != static_cast<std::uint64_t>(params.head_range().end)) {
    throw FormatError(r.name() + ": header dimensions disagree with descriptor " + descriptor);
  }
  for (Index i = 0; i < params.dim(); ++i) params.mutable_values()(i) = r.F64("values");
  return {spec, std::move(params)};
}

void WriteReportLog(const std::filesystem::path& path, const TrainingTrace& trace) {
  if (trace.reports.empty()) throw AuditError("trace retained no gradient reports");
  Writer w(path);
  w.Bytes(kReportMagic, 8);
  w.U32(kVersion);
  w.U32(static_cast<std::uint32_t>(trace.strategy));
  w.U32(static_cast<std::uint32_t>(trace.reports.front().size()));
  w.U32(static_cast<std::uint32_t>(trace.reports.size()));
  w.U64(static_cast<std::uint64_t>(trace.reports.front().front().update.size()));
  for (std::size_t r = 0; r < trace.reports.size(); ++r) {
    w.U32(static_cast<std::uint32_t>(r + 1));
    w.F64(trace.learning_rates[r]);
    for (const auto& report : trace.reports[r]) {
      w.U32(static_cast<std::uint32_t>(report.client_id));
      w.F64(report.weight);
      for (Index i = 0; i < report.update.size(); ++i) w.F64(report.update(i));
    }
  }
  w.Finish();
}

ReportLog ReadReportLog(const std::filesystem::path& path) {
  Reader r(path);
  r.ExpectMagic(kReportMagic);
  ReportLog log;
  const std::uint32_t strategy = r.U32("strategy");
  if (strategy > 2) throw FormatError(r.name() + ": unknown strategy code");
  log.strategy = static_cast<Strategy>(strategy);
  const std::uint32_t clients = r.U32("num_clients");
  const std::uint32_t rounds = r.U32("rounds");
  const std::uint64_t dim = r.U64("dim");
  if (dim > (1u << 28)) throw FormatError(r.name() + ": implausible dimension");
  for (std::uint32_t t = 0; t < rounds; ++t) {
    const std::uint32_t round = r.U32("round");
    if (round != t + 1) throw FormatError(r.name() + ": rounds out of order");
    log.learning_rates.push_back(r.F64("lr"));
    std::vector<GradientReport> reports(clients);
    for (auto& report : reports) {
      report.round = static_cast<int>(round);
      report.client_id = static_cast<int>(r.U32("client_id"));
      report.weight = r.F64("weight");
      report.update.resize(static_cast<Index>(dim));
      for (Index i = 0; i < report.update.size(); ++i) report.update(i) = r.F64("update");
    }
    log.reports.push_back(std::move(reports));
  }
  return log;
}

}  // namespace dpfl
