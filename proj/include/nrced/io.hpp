/*
 *  Copyright 2026 The NRCED Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "nrced/dsp.hpp"
#include "nrced/tf.hpp"

namespace nrced {

namespace fs = std::filesystem;

/// Shortest round-tripping decimal form of a double; the one float format
/// used in every CSV we emit, so identical numbers always print identically.
std::string format_double(double v);

/// Writes content to `path + ".tmp"` then renames, so readers never observe
/// a partial file.
void atomic_write_text(const fs::path& path, const std::string& content);
void atomic_write_bytes(const fs::path& path, const std::vector<uint8_t>& bytes);

// ---- Recording ingestion (CSV + sidecar JSON manifest) ----

extern const char* const kRecordingCsvHeader;

Recording read_recording_csv(const fs::path& csv_path,
                             const fs::path& manifest_path);
void write_recording_csv(const fs::path& csv_path, const Recording& rec);
void write_manifest(const fs::path& manifest_path, const std::string& patient_id,
                    int sample_rate_hz);

LabelTable read_labels_csv(const fs::path& path);
void write_labels_csv(const fs::path& path, const LabelTable& labels);

/// Patients present in a data directory: every `<id>.csv` with a matching
/// `<id>.json` manifest. Sorted by id.
std::vector<std::string> list_patients(const fs::path& data_dir);

// ---- Beat-tensor container ----
//
// Layout (all integers little-endian):
//   magic "NRCD" | u32 version=1 | u32 beat_count | u32 channels | u32 K
//   | u32 T | beat_count * channels*K*T float32 (row-major, one tensor per
//   beat) | beat_count * { u64 r_peak_index, u8 label }

struct BeatTensorMeta {
  uint64_t r_peak_index = 0;
  BeatLabel label = BeatLabel::Unlabeled;
};

struct BeatTensorFile {
  uint32_t channels = 0;
  uint32_t num_freqs = 0;
  uint32_t num_frames = 0;
  std::vector<float> payload;        // beat_count * channels*K*T
  std::vector<BeatTensorMeta> meta;  // beat_count entries

  size_t beat_count() const { return meta.size(); }
  size_t tensor_size() const {
    return static_cast<size_t>(channels) * num_freqs * num_frames;
  }
  void append(const TFTensor& t, const BeatTensorMeta& m);
  TFTensor tensor(size_t index, int source_len) const;
};

void write_beat_tensors(const fs::path& path, const BeatTensorFile& file);
BeatTensorFile read_beat_tensors(const fs::path& path);

// ---- Model checkpoint ----
//
// One compact JSON header line (config, layer shapes, seed, training step),
// a newline, then the float32 parameter payload in declared layer order.

void write_checkpoint_file(const fs::path& path, const std::string& header_json,
                           const std::vector<float>& payload);
std::pair<std::string, std::vector<float>> read_checkpoint_file(const fs::path& path);

// ---- Small JSON helpers ----

nlohmann::json read_json_file(const fs::path& path);
void write_json_file(const fs::path& path, const nlohmann::json& j);

}  // namespace nrced
