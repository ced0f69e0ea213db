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

#include "emgseq/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace emgseq::checkpoint {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'E', 'M', 'G', 'C', 'K', 'P', 'T', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::istream& in, const char* what) {
    unsigned char b[4];
    require(static_cast<bool>(in.read(reinterpret_cast<char*>(b), 4)), "truncated_checkpoint",
            std::string("truncated while reading ") + what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t read_u64(std::istream& in, const char* what) {
    unsigned char b[8];
    require(static_cast<bool>(in.read(reinterpret_cast<char*>(b), 8)), "truncated_checkpoint",
            std::string("truncated while reading ") + what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

std::string provenance_name(Provenance p) {
    switch (p) {
        case Provenance::Supervised: return "supervised";
        case Provenance::Distilled: return "distilled";
        case Provenance::Personalized: return "personalized";
    }
    return "supervised";
}

Provenance provenance_from_name(const std::string& name) {
    if (name == "supervised") return Provenance::Supervised;
    if (name == "distilled") return Provenance::Distilled;
    if (name == "personalized") return Provenance::Personalized;
    fail("bad_checkpoint", "unknown provenance: " + name);
}

void save(const model::Model& m, const CheckpointMeta& meta, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), "io_error", "cannot open for writing: " + path);

    json header = {
        {"format", "emgseq-checkpoint-v1"},
        {"arch", model::arch_to_json(m.config())},
        {"seed", meta.seed},
        {"provenance", provenance_name(meta.provenance)},
        {"checkpoint_id", meta.checkpoint_id},
        {"parent_id", meta.parent_id},
    };
    const std::string header_str = header.dump();

    out.write(kMagic, 8);
    write_u32(out, static_cast<std::uint32_t>(header_str.size()));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    write_u32(out, static_cast<std::uint32_t>(m.num_tensors()));
    for (std::size_t i = 0; i < m.num_tensors(); ++i) {
        const std::string& name = m.param_name(i);
        const MatF& p = m.param(i);
        write_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(out, 2);
        write_u64(out, static_cast<std::uint64_t>(p.rows));
        write_u64(out, static_cast<std::uint64_t>(p.cols));
        out.write(reinterpret_cast<const char*>(p.v.data()),
                  static_cast<std::streamsize>(p.v.size() * sizeof(float)));
    }
    require(out.good(), "io_error", "write failed: " + path);
}

Loaded load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "io_error", "cannot open: " + path);

    char magic[8];
    require(static_cast<bool>(in.read(magic, 8)) && std::memcmp(magic, kMagic, 8) == 0,
            "bad_magic", "bad magic bytes in checkpoint " + path);

    const std::uint32_t header_len = read_u32(in, "header length");
    std::string header_str(header_len, '\0');
    require(static_cast<bool>(in.read(header_str.data(), header_len)), "truncated_checkpoint",
            "truncated header in " + path);
    json header;
    try {
        header = json::parse(header_str);
    } catch (const json::exception& e) {
        fail("bad_checkpoint", std::string("header is not valid JSON: ") + e.what());
    }

    CheckpointMeta meta;
    model::ArchConfig arch;
    try {
        meta.seed = header.at("seed").get<std::uint64_t>();
        meta.provenance = provenance_from_name(header.at("provenance").get<std::string>());
        meta.checkpoint_id = header.at("checkpoint_id").get<std::string>();
        meta.parent_id = header.value("parent_id", "");
        arch = model::arch_from_json(header.at("arch"));
    } catch (const json::exception& e) {
        fail("bad_checkpoint", std::string("missing header field: ") + e.what());
    }
    Loaded loaded{model::Model::build(arch, meta.seed), meta};

    const std::uint32_t num_blobs = read_u32(in, "blob count");
    require(num_blobs == loaded.model.num_tensors(), "incompatible_checkpoint",
            "checkpoint holds " + std::to_string(num_blobs) + " tensors, model expects " +
                std::to_string(loaded.model.num_tensors()));
    for (std::uint32_t i = 0; i < num_blobs; ++i) {
        const std::uint32_t name_len = read_u32(in, "blob name length");
        std::string name(name_len, '\0');
        require(static_cast<bool>(in.read(name.data(), name_len)), "truncated_checkpoint",
                "truncated blob name in " + path);
        const std::uint32_t ndim = read_u32(in, "blob rank");
        require(ndim == 2, "bad_checkpoint", "expected rank-2 blobs");
        const std::uint64_t rows = read_u64(in, "blob rows");
        const std::uint64_t cols = read_u64(in, "blob cols");
        MatF& p = loaded.model.param(loaded.model.param_index(name));
        require(p.rows == static_cast<std::int64_t>(rows) &&
                    p.cols == static_cast<std::int64_t>(cols),
                "incompatible_checkpoint", "shape mismatch for " + name);
        require(static_cast<bool>(in.read(reinterpret_cast<char*>(p.v.data()),
                                          static_cast<std::streamsize>(p.v.size() * sizeof(float)))),
                "truncated_checkpoint", "truncated weights for " + name);
    }
    return loaded;
}

}  // namespace emgseq::checkpoint
