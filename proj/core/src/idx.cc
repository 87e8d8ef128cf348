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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "dpfl/data.h"

namespace dpfl {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<unsigned char> ReadAll(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t ReadBigEndian32(const std::vector<unsigned char>& bytes,
                              std::size_t offset, const std::string& file,
                              const std::string& field) {
  if (offset + 4 > bytes.size()) {
    throw FormatError(file + ": truncated header while reading " + field);
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void WriteBigEndian32(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> b = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                                 static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b.data(), 4);
}

}  // namespace

LabeledDataset LoadIdx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path) {
  const std::string img_name = images_path.filename().string();
  const std::string lbl_name = labels_path.filename().string();
  const auto img = ReadAll(images_path);
  const auto lbl = ReadAll(labels_path);

  const std::uint32_t img_magic = ReadBigEndian32(img, 0, img_name, "magic");
  if (img_magic != kImageMagic) {
    throw FormatError(img_name + ": bad magic number 0x" +
                      [&] {
                        char buf[16];
                        std::snprintf(buf, sizeof buf, "%08x", img_magic);
                        return std::string(buf);
                      }() +
                      " (expected 0x00000803)");
  }
  const std::uint32_t count = ReadBigEndian32(img, 4, img_name, "image count");
  const std::uint32_t rows = ReadBigEndian32(img, 8, img_name, "row count");
  const std::uint32_t cols = ReadBigEndian32(img, 12, img_name, "column count");
  const std::size_t dim = std::size_t{rows} * cols;
  if (dim == 0) throw FormatError(img_name + ": zero-sized image dimensions");
  const std::size_t header = 16;
  if (img.size() < header + std::size_t{count} * dim) {
    throw FormatError(img_name + ": truncated pixel data (expected " +
                      std::to_string(std::size_t{count} * dim) + " bytes, found " +
                      std::to_string(img.size() - std::min(img.size(), header)) + ")");
  }

  const std::uint32_t lbl_magic = ReadBigEndian32(lbl, 0, lbl_name, "magic");
  if (lbl_magic != kLabelMagic) {
    throw FormatError(lbl_name + ": bad magic number (expected 0x00000801)");
  }
  const std::uint32_t label_count = ReadBigEndian32(lbl, 4, lbl_name, "label count");
  if (label_count != count) {
    throw FormatError("image count " + std::to_string(count) +
                      " does not match label count " + std::to_string(label_count));
  }
  if (lbl.size() < 8 + std::size_t{label_count}) {
    throw FormatError(lbl_name + ": truncated label data");
  }

  Matrix x(static_cast<Index>(count), static_cast<Index>(dim));
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      x(static_cast<Index>(i), static_cast<Index>(j)) = img[header + i * dim + j] / 255.0;
    }
  }
  std::vector<int> y(count);
  int max_label = 1;
  for (std::size_t i = 0; i < count; ++i) {
    y[i] = lbl[8 + i];
    max_label = std::max(max_label, y[i]);
  }
  return LabeledDataset(std::move(x), std::move(y), max_label + 1, img_name);
}

void WriteIdx(const LabeledDataset& dataset, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path) {
  if (dataset.num_classes() > 256) {
    throw ParameterError("WriteIdx: labels must fit in one byte");
  }
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lbl(labels_path, std::ios::binary);
  if (!img || !lbl) throw FormatError("WriteIdx: cannot open output files");

  WriteBigEndian32(img, kImageMagic);
  WriteBigEndian32(img, static_cast<std::uint32_t>(dataset.size()));
  WriteBigEndian32(img, 1);
  WriteBigEndian32(img, static_cast<std::uint32_t>(dataset.dim()));
  std::vector<char> row(static_cast<std::size_t>(dataset.dim()));
  for (Index i = 0; i < dataset.size(); ++i) {
    for (Index j = 0; j < dataset.dim(); ++j) {
      const double v = std::clamp(dataset.features()(i, j), 0.0, 1.0);
      row[static_cast<std::size_t>(j)] =
          static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
    img.write(row.data(), static_cast<std::streamsize>(row.size()));
  }

  WriteBigEndian32(lbl, kLabelMagic);
  WriteBigEndian32(lbl, static_cast<std::uint32_t>(dataset.size()));
  for (int y : dataset.labels()) lbl.put(static_cast<char>(static_cast<unsigned char>(y)));
  if (!img || !lbl) throw FormatError("WriteIdx: write failed");
}

}  // namespace dpfl
