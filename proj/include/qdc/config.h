// Copyright 2026 The QDC Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef QDC_CONFIG_H_
#define QDC_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

#include "qdc/datagen.h"
#include "qdc/pipeline.h"

namespace qdc {

// Everything a run needs. `seed` is the single root seed; it is copied into
// stream.seed and train.seed by sync_seed().
struct Config {
  uint64_t seed = 42;
  StreamSpec stream;
  TrainConfig train;
  std::string method = "FT+QDC";
  // BEIR directories, one per task in training order. Empty means the
  // synthetic stream.
  std::vector<std::string> datasets;
  std::string out_dir = "out";
  std::string run_id = "default";

  void sync_seed();
  std::string run_dir() const;
};

// JSON; unknown keys are rejected with ParseError.
Config config_from_json(const std::string& text);
Config load_config(const std::string& path);
std::string config_to_json(const Config& config);

}  // namespace qdc

#endif  // QDC_CONFIG_H_
