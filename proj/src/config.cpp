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

#include "nrced/config.hpp"

#include "nrced/io.hpp"

namespace nrced {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) known = known || it.key() == k;
    if (!known) fail_data(where + ": unknown key '" + it.key() + "'");
  }
}

}  // namespace

json preprocess_config_to_json(const PreprocessConfig& cfg) {
  json j;
  j["band_low_hz"] = cfg.band.low_hz;
  j["band_high_hz"] = cfg.band.high_hz;
  j["filter_order"] = cfg.band.order;
  j["peak_lead"] = cfg.peaks.lead;
  j["prominence_scale"] = cfg.peaks.prominence_scale;
  j["refractory_ms"] = cfg.peaks.refractory_ms;
  j["half_window"] = cfg.half_window;
  j["label_match_tolerance"] = cfg.label_match_tolerance;
  return j;
}

PreprocessConfig preprocess_config_from_json(const json& j) {
  check_keys(j,
             {"band_low_hz", "band_high_hz", "filter_order", "peak_lead",
              "prominence_scale", "refractory_ms", "half_window",
              "label_match_tolerance"},
             "preprocess config");
  PreprocessConfig c;
  if (j.contains("band_low_hz")) c.band.low_hz = j["band_low_hz"].get<double>();
  if (j.contains("band_high_hz")) c.band.high_hz = j["band_high_hz"].get<double>();
  if (j.contains("filter_order")) c.band.order = j["filter_order"].get<int>();
  if (j.contains("peak_lead")) c.peaks.lead = j["peak_lead"].get<int>();
  if (j.contains("prominence_scale"))
    c.peaks.prominence_scale = j["prominence_scale"].get<double>();
  if (j.contains("refractory_ms"))
    c.peaks.refractory_ms = j["refractory_ms"].get<double>();
  if (j.contains("half_window")) c.half_window = j["half_window"].get<int>();
  if (j.contains("label_match_tolerance"))
    c.label_match_tolerance = j["label_match_tolerance"].get<int>();
  return c;
}

json RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["threads"] = threads;
  j["stft"] = {{"window_len", stft.window_len},
               {"hop", stft.hop},
               {"fft_len", stft.fft_len},
               {"source_len", stft.source_len}};
  j["model"] = model.to_json();
  j["experiment"] = experiment.to_json();
  j["preprocess"] = preprocess_config_to_json(preprocess);
  json patients = json::array();
  for (const SynthPatientConfig& p : synth) patients.push_back(p.to_json());
  j["synth"] = {{"patients", patients}};
  j["analysis"] = {{"lambda", ridge_lambda}};
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  check_keys(j, {"seed", "threads", "stft", "model", "experiment", "preprocess",
                 "synth", "analysis"},
             "run config");
  RunConfig c;
  if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
  if (j.contains("threads")) c.threads = j["threads"].get<int>();

  if (j.contains("stft")) {
    const json& s = j["stft"];
    check_keys(s, {"window_len", "hop", "fft_len", "source_len"}, "stft config");
    c.stft = make_stft_config(s.value("window_len", 30), s.value("hop", 15),
                              s.value("fft_len", 30), s.value("source_len", 250));
  }

  // Components without an explicit seed derive theirs from the master seed,
  // so one --seed flag re-randomizes the whole pipeline coherently.
  if (j.contains("model")) {
    json m = j["model"];
    if (!m.contains("seed")) m["seed"] = derive_seed(c.seed, 300);
    c.model = ModelConfig::from_json(m);
  } else {
    c.model.seed = derive_seed(c.seed, 300);
  }

  if (j.contains("experiment")) {
    json e = j["experiment"];
    if (!e.contains("seed")) e["seed"] = derive_seed(c.seed, 100);
    c.experiment = ExperimentSpec::from_json(e);
  } else {
    c.experiment.seed = derive_seed(c.seed, 100);
  }

  if (j.contains("preprocess"))
    c.preprocess = preprocess_config_from_json(j["preprocess"]);

  if (j.contains("synth")) {
    check_keys(j["synth"], {"patients"}, "synth config");
    if (j["synth"].contains("patients")) {
      size_t i = 0;
      for (const json& p : j["synth"]["patients"]) {
        json q = p;
        if (!q.contains("seed")) q["seed"] = derive_seed(c.seed, 200 + i);
        c.synth.push_back(SynthPatientConfig::from_json(q));
        ++i;
      }
    }
  }

  if (j.contains("analysis")) {
    check_keys(j["analysis"], {"lambda"}, "analysis config");
    if (j["analysis"].contains("lambda"))
      c.ridge_lambda = j["analysis"]["lambda"].get<double>();
    if (!(c.ridge_lambda > 0.0))
      fail_data("analysis config: lambda must be positive");
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path,
                          std::optional<uint64_t> seed_override) {
  json j = read_json_file(path);
  if (seed_override) j["seed"] = *seed_override;
  return from_json(j);
}

}  // namespace nrced
