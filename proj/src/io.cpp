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

#include "nrced/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>

#include "nrced/common.hpp"

namespace nrced {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(std::string_view s, const std::string& context) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    fail_data(context + ": malformed number '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

template <typename T>
void put_le(std::vector<uint8_t>& buf, T v) {
  for (size_t i = 0; i < sizeof(T); ++i)
    buf.push_back(static_cast<uint8_t>((static_cast<uint64_t>(v) >> (8 * i)) & 0xff));
}

void put_le_f32(std::vector<uint8_t>& buf, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_le(buf, bits);
}

class ByteReader {
public:
  ByteReader(const std::vector<uint8_t>& bytes, std::string name)
      : bytes_(bytes), name_(std::move(name)) {}

  template <typename T>
  T get_le() {
    need(sizeof(T));
    uint64_t v = 0;
    for (size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  float get_le_f32() {
    uint32_t bits = get_le<uint32_t>();
    float v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

  void expect_magic(const char* magic) {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, magic, 4) != 0)
      fail_data(name_ + ": bad magic, not a beat-tensor file");
    pos_ += 4;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

private:
  void need(size_t n) {
    if (pos_ + n > bytes_.size()) fail_data(name_ + ": truncated file");
  }
  const std::vector<uint8_t>& bytes_;
  std::string name_;
  size_t pos_ = 0;
};

std::vector<uint8_t> read_all_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_data("cannot open '" + path.string() + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return bytes;
}

}  // namespace

void atomic_write_bytes(const fs::path& path, const std::vector<uint8_t>& bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail_data("cannot write '" + tmp.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) fail_data("short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

void atomic_write_text(const fs::path& path, const std::string& content) {
  std::vector<uint8_t> bytes(content.begin(), content.end());
  atomic_write_bytes(path, bytes);
}

const char* const kRecordingCsvHeader =
    "I,II,III,aVR,aVL,aVF,V1,V2,V3,V4,V5,V6,EGM1,EGM2,EGM3,EGM4,EGM5";

Recording read_recording_csv(const fs::path& csv_path,
                             const fs::path& manifest_path) {
  json manifest = read_json_file(manifest_path);
  for (auto it = manifest.begin(); it != manifest.end(); ++it)
    if (it.key() != "patient_id" && it.key() != "sample_rate_hz")
      fail_data("manifest '" + manifest_path.string() + "': unknown key '" +
                it.key() + "'");
  if (!manifest.contains("patient_id") || !manifest["patient_id"].is_string())
    fail_data("manifest '" + manifest_path.string() + "': missing patient_id");
  if (!manifest.contains("sample_rate_hz") ||
      !manifest["sample_rate_hz"].is_number_integer())
    fail_data("manifest '" + manifest_path.string() + "': missing sample_rate_hz");

  Recording rec;
  rec.patient_id = manifest["patient_id"].get<std::string>();
  rec.sample_rate_hz = manifest["sample_rate_hz"].get<int>();
  if (rec.sample_rate_hz <= 0)
    fail_data("manifest '" + manifest_path.string() + "': sample rate must be positive");

  std::ifstream in(csv_path);
  if (!in) fail_data("cannot open recording '" + csv_path.string() + "'");
  std::string line;
  if (!std::getline(in, line))
    fail_data("recording '" + csv_path.string() + "' is empty");
  strip_cr(line);
  if (line != kRecordingCsvHeader)
    fail_data("recording '" + csv_path.string() + "': unexpected header row");

  std::vector<std::array<double, kEcgLeads + kEgmLeads>> rows;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != kEcgLeads + kEgmLeads)
      fail_data("recording '" + csv_path.string() + "' line " +
                std::to_string(lineno) + ": expected 17 columns");
    std::array<double, kEcgLeads + kEgmLeads> row;
    for (size_t i = 0; i < row.size(); ++i) {
      row[i] = parse_double(fields[i], csv_path.string());
      if (!std::isfinite(row[i]))
        fail_data("recording '" + csv_path.string() + "' line " +
                  std::to_string(lineno) + ": non-finite value");
    }
    rows.push_back(row);
  }
  if (rows.empty()) fail_data("recording '" + csv_path.string() + "': no samples");

  const int64_t L = static_cast<int64_t>(rows.size());
  rec.ecg.resize(kEcgLeads, L);
  rec.egm.resize(kEgmLeads, L);
  for (int64_t i = 0; i < L; ++i) {
    for (int c = 0; c < kEcgLeads; ++c) rec.ecg(c, i) = rows[i][c];
    for (int c = 0; c < kEgmLeads; ++c) rec.egm(c, i) = rows[i][kEcgLeads + c];
  }
  return rec;
}

void write_recording_csv(const fs::path& csv_path, const Recording& rec) {
  std::string out;
  out.reserve(static_cast<size_t>(rec.num_samples()) * 170 + 64);
  out += kRecordingCsvHeader;
  out += '\n';
  for (int64_t i = 0; i < rec.num_samples(); ++i) {
    for (int c = 0; c < kEcgLeads; ++c) {
      if (c) out += ',';
      out += format_double(rec.ecg(c, i));
    }
    for (int c = 0; c < kEgmLeads; ++c) {
      out += ',';
      out += format_double(rec.egm(c, i));
    }
    out += '\n';
  }
  atomic_write_text(csv_path, out);
}

void write_manifest(const fs::path& manifest_path, const std::string& patient_id,
                    int sample_rate_hz) {
  json j;
  j["patient_id"] = patient_id;
  j["sample_rate_hz"] = sample_rate_hz;
  atomic_write_text(manifest_path, j.dump() + "\n");
}

namespace {

const char* label_name(BeatLabel l) {
  switch (l) {
    case BeatLabel::Sinus: return "sinus";
    case BeatLabel::Atypical: return "atypical";
    case BeatLabel::Unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

BeatLabel label_from_name(std::string_view s, const std::string& context) {
  if (s == "sinus") return BeatLabel::Sinus;
  if (s == "atypical") return BeatLabel::Atypical;
  if (s == "unlabeled") return BeatLabel::Unlabeled;
  fail_data(context + ": unknown label '" + std::string(s) + "'");
}

}  // namespace

LabelTable read_labels_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail_data("cannot open labels '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) fail_data("labels '" + path.string() + "' empty");
  strip_cr(line);
  if (line != "beat_index,r_peak_index,label")
    fail_data("labels '" + path.string() + "': unexpected header row");
  LabelTable table;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 3)
      fail_data("labels '" + path.string() + "' line " + std::to_string(lineno) +
                ": expected 3 columns");
    LabelRow row;
    row.beat_index = static_cast<int>(parse_double(fields[0], path.string()));
    row.r_peak_index = static_cast<int64_t>(parse_double(fields[1], path.string()));
    row.label = label_from_name(fields[2], path.string());
    table.push_back(row);
  }
  return table;
}

void write_labels_csv(const fs::path& path, const LabelTable& labels) {
  std::string out = "beat_index,r_peak_index,label\n";
  for (const LabelRow& row : labels) {
    out += std::to_string(row.beat_index);
    out += ',';
    out += std::to_string(row.r_peak_index);
    out += ',';
    out += label_name(row.label);
    out += '\n';
  }
  atomic_write_text(path, out);
}

std::vector<std::string> list_patients(const fs::path& data_dir) {
  if (!fs::is_directory(data_dir))
    fail_data("data directory '" + data_dir.string() + "' does not exist");
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(data_dir)) {
    if (!entry.is_regular_file()) continue;
    const fs::path& p = entry.path();
    if (p.extension() != ".csv") continue;
    std::string stem = p.stem().string();
    if (stem.rfind("labels_", 0) == 0) continue;
    if (fs::exists(data_dir / (stem + ".json"))) ids.push_back(stem);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

void BeatTensorFile::append(const TFTensor& t, const BeatTensorMeta& m) {
  if (meta.empty()) {
    channels = static_cast<uint32_t>(t.channels);
    num_freqs = static_cast<uint32_t>(t.num_freqs);
    num_frames = static_cast<uint32_t>(t.num_frames);
  } else if (channels != static_cast<uint32_t>(t.channels) ||
             num_freqs != static_cast<uint32_t>(t.num_freqs) ||
             num_frames != static_cast<uint32_t>(t.num_frames)) {
    fail_data("beat-tensor file: mixed tensor shapes");
  }
  payload.reserve(payload.size() + t.data.size());
  for (double v : t.data) payload.push_back(static_cast<float>(v));
  meta.push_back(m);
}

TFTensor BeatTensorFile::tensor(size_t index, int source_len) const {
  TFTensor t;
  t.channels = static_cast<int>(channels);
  t.num_freqs = static_cast<int>(num_freqs);
  t.num_frames = static_cast<int>(num_frames);
  t.source_len = source_len;
  const size_t sz = tensor_size();
  t.data.resize(sz);
  const float* src = payload.data() + index * sz;
  for (size_t i = 0; i < sz; ++i) t.data[i] = static_cast<double>(src[i]);
  return t;
}

void write_beat_tensors(const fs::path& path, const BeatTensorFile& file) {
  if (file.payload.size() != file.beat_count() * file.tensor_size())
    fail_data("beat-tensor file: payload size inconsistent with beat count");
  std::vector<uint8_t> buf;
  buf.reserve(24 + file.payload.size() * 4 + file.meta.size() * 9);
  buf.insert(buf.end(), {'N', 'R', 'C', 'D'});
  put_le<uint32_t>(buf, 1);
  put_le<uint32_t>(buf, static_cast<uint32_t>(file.beat_count()));
  put_le<uint32_t>(buf, file.channels);
  put_le<uint32_t>(buf, file.num_freqs);
  put_le<uint32_t>(buf, file.num_frames);
  for (float v : file.payload) put_le_f32(buf, v);
  for (const BeatTensorMeta& m : file.meta) {
    put_le<uint64_t>(buf, m.r_peak_index);
    put_le<uint8_t>(buf, static_cast<uint8_t>(m.label));
  }
  atomic_write_bytes(path, buf);
}

BeatTensorFile read_beat_tensors(const fs::path& path) {
  std::vector<uint8_t> bytes = read_all_bytes(path);
  ByteReader r(bytes, path.string());
  r.expect_magic("NRCD");
  uint32_t version = r.get_le<uint32_t>();
  if (version != 1)
    fail_data(path.string() + ": unsupported version " + std::to_string(version));
  uint32_t count = r.get_le<uint32_t>();
  BeatTensorFile file;
  file.channels = r.get_le<uint32_t>();
  file.num_freqs = r.get_le<uint32_t>();
  file.num_frames = r.get_le<uint32_t>();
  const size_t sz = file.tensor_size();
  if (sz == 0 && count > 0) fail_data(path.string() + ": empty tensor shape");
  file.payload.resize(count * sz);
  for (size_t i = 0; i < file.payload.size(); ++i)
    file.payload[i] = r.get_le_f32();
  file.meta.resize(count);
  for (uint32_t i = 0; i < count; ++i) {
    file.meta[i].r_peak_index = r.get_le<uint64_t>();
    uint8_t lb = r.get_le<uint8_t>();
    if (lb > 2) fail_data(path.string() + ": invalid label byte");
    file.meta[i].label = static_cast<BeatLabel>(lb);
  }
  if (!r.at_end()) fail_data(path.string() + ": trailing bytes");
  return file;
}

void write_checkpoint_file(const fs::path& path, const std::string& header_json,
                           const std::vector<float>& payload) {
  std::vector<uint8_t> buf;
  buf.reserve(header_json.size() + 1 + payload.size() * 4);
  buf.insert(buf.end(), header_json.begin(), header_json.end());
  buf.push_back('\n');
  for (float v : payload) put_le_f32(buf, v);
  atomic_write_bytes(path, buf);
}

std::pair<std::string, std::vector<float>> read_checkpoint_file(const fs::path& path) {
  std::vector<uint8_t> bytes = read_all_bytes(path);
  auto nl = std::find(bytes.begin(), bytes.end(), static_cast<uint8_t>('\n'));
  if (nl == bytes.end()) fail_data(path.string() + ": missing checkpoint header");
  std::string header(bytes.begin(), nl);
  size_t offset = static_cast<size_t>(nl - bytes.begin()) + 1;
  size_t remaining = bytes.size() - offset;
  if (remaining % 4 != 0) fail_data(path.string() + ": truncated parameter payload");
  std::vector<float> payload(remaining / 4);
  for (size_t i = 0; i < payload.size(); ++i) {
    uint32_t bits = 0;
    for (int b = 0; b < 4; ++b)
      bits |= static_cast<uint32_t>(bytes[offset + 4 * i + b]) << (8 * b);
    std::memcpy(&payload[i], &bits, 4);
  }
  return {std::move(header), std::move(payload)};
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail_data("cannot open '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    fail_data("'" + path.string() + "': " + e.what());
  }
  return j;
}

void write_json_file(const fs::path& path, const json& j) {
  atomic_write_text(path, j.dump(2) + "\n");
}

}  // namespace nrced
