// Copyright 2026 The emgseq Authors
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

#pragma once

#include <string>

#include "emgseq/model.hpp"

namespace emgseq::checkpoint {

/// Training provenance carried in the checkpoint header.
enum class Provenance { Supervised, Distilled, Personalized };

std::string provenance_name(Provenance p);
Provenance provenance_from_name(const std::string& name);

struct CheckpointMeta {
    std::string checkpoint_id;
    Provenance provenance = Provenance::Supervised;
    std::string parent_id;  // source checkpoint for distilled / personalized
    std::uint64_t seed = 0;
};

/// Header JSON (arch config + provenance) followed by named, shape-prefixed
/// little-endian f32 weight blobs.
void save(const model::Model& m, const CheckpointMeta& meta, const std::string& path);

struct Loaded {
    model::Model model;
    CheckpointMeta meta;
};

Loaded load(const std::string& path);

}  // namespace emgseq::checkpoint
