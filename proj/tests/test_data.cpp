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

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "emgseq/data.hpp"
#include "fixtures.hpp"

using namespace emgseq;
namespace fs = std::filesystem;

namespace {

data::Session make_session(std::int64_t num_samples, std::uint32_t channels = 32,
                           std::uint64_t seed = 1) {
    data::Session s;
    s.user_id = "u0";
    s.session_id = "s0";
    s.num_channels = channels;
    s.samples = MatF(num_samples, channels);
    Rng rng(seed);
    for (float& v : s.samples.v) v = static_cast<float>(rng.normal());
    return s;
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("session round trip is bit exact") {
    const std::string dir = fixtures::temp_dir("data-roundtrip");
    data::Session s = make_session(500);
    s.labels = {{3, 10}, {1, 200}, {3, 499}};
    const std::string p1 = dir + "/a.emgseq";
    const std::string p2 = dir + "/b.emgseq";
    data::save_session(s, p1);
    const data::Session loaded = data::load_session(p1);
    CHECK(loaded.user_id == s.user_id);
    CHECK(loaded.sample_rate_hz == s.sample_rate_hz);
    CHECK(loaded.samples.v == s.samples.v);  // float bytes identical
    CHECK(loaded.labels.size() == 3);
    CHECK(loaded.labels[1].symbol == 1);
    data::save_session(loaded, p2);
    CHECK(read_bytes(p1) == read_bytes(p2));
}

TEST_CASE("bad magic is a distinct diagnostic") {
    const std::string dir = fixtures::temp_dir("data-magic");
    const std::string path = dir + "/x.emgseq";
    data::save_session(make_session(50), path);
    std::string bytes = read_bytes(path);
    bytes[3] ^= 0x5A;
    std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
    CHECK_THROWS_WITH_AS(data::load_session(path), doctest::Contains("bad magic"), Error);
}

TEST_CASE("truncated sample block is a distinct diagnostic") {
    const std::string dir = fixtures::temp_dir("data-trunc");
    const std::string path = dir + "/x.emgseq";
    data::save_session(make_session(50), path);
    std::string bytes = read_bytes(path);
    bytes.resize(bytes.size() / 2);
    std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
    try {
        data::load_session(path);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == "truncated_samples");
    }
}

TEST_CASE("label timestamp at num_samples is rejected at save") {
    data::Session s = make_session(100);
    s.labels = {{1, 100}};  // == num_samples, outside [0, 100)
    try {
        data::save_session(s, fixtures::temp_dir("data-label") + "/x.emgseq");
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == "label_out_of_range");
    }
}

TEST_CASE("label invariants: order, blank, band multiple") {
    data::Session s = make_session(100);
    s.labels = {{1, 50}, {2, 10}};
    CHECK_THROWS_AS(data::validate_session(s), Error);
    s.labels = {{0, 10}};
    CHECK_THROWS_AS(data::validate_session(s), Error);
    s.labels.clear();
    s.num_channels = 30;  // not a band multiple
    CHECK_THROWS_AS(data::validate_session(s), Error);
}

TEST_CASE("paper window shape: 8000 window with 1800/200 pads spans 10000 samples") {
    const data::Session s = make_session(16000);
    const auto windows = data::window_session(s, 8000, 1800, 200, 8000);
    REQUIRE(windows.size() == 2);
    CHECK(windows[0].signal.rows == 10000);
    CHECK(windows[0].signal.cols == 32);
    // 900 ms / 100 ms of context at 2 kHz
    CHECK(data::samples_from_ms(900, 2000) == 1800);
    CHECK(data::samples_from_ms(100, 2000) == 200);
}

TEST_CASE("single window with no events has empty target") {
    const data::Session s = make_session(100);
    const auto windows = data::window_session(s, 100, 0, 0, 100);
    REQUIRE(windows.size() == 1);
    CHECK(windows[0].target.empty());
}

TEST_CASE("events land in the window whose core holds their timestamp") {
    data::Session s = make_session(12000);
    s.labels = {{2, 100}, {3, 8100}};
    const auto windows = data::window_session(s, 8000, 0, 0, 8000);
    REQUIRE(windows.size() == 2);  // ceil(12000 / 8000)
    CHECK(windows[0].target == std::vector<int>{2});
    CHECK(windows[1].target == std::vector<int>{3});
}

TEST_CASE("window longer than the session yields one zero-padded window") {
    data::Session s = make_session(1000);
    s.labels = {{1, 999}};
    const auto windows = data::window_session(s, 8000, 1800, 200, 8000);
    REQUIRE(windows.size() == 1);
    CHECK(windows[0].signal.rows == 10000);
    CHECK(windows[0].target == std::vector<int>{1});
    // Rows before pad_past and after the session tail must be zero.
    for (std::int64_t c = 0; c < 32; ++c) {
        CHECK(windows[0].signal.at(0, c) == 0.0f);
        CHECK(windows[0].signal.at(9999, c) == 0.0f);
    }
    CHECK_THROWS_AS(data::window_session(s, 8000, 0, 0, 0), Error);  // non-positive hop
}

TEST_CASE("window count and label partition properties") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const std::int64_t len = 50 + static_cast<std::int64_t>(rng.next_below(500));
        data::Session s = make_session(len, 32, static_cast<std::uint64_t>(trial));
        std::uint64_t t = rng.next_below(10);
        while (t < static_cast<std::uint64_t>(len)) {
            s.labels.push_back({1 + static_cast<std::uint32_t>(rng.next_below(4)), t});
            t += 1 + rng.next_below(40);
        }
        const std::int64_t window = 1 + static_cast<std::int64_t>(rng.next_below(100));
        const auto windows = data::window_session(s, window, 5, 3, window);
        CHECK(static_cast<std::int64_t>(windows.size()) == (len + window - 1) / window);
        std::vector<int> joined;
        for (const auto& w : windows) {
            joined.insert(joined.end(), w.target.begin(), w.target.end());
        }
        std::vector<int> expected;
        for (const auto& e : s.labels) expected.push_back(static_cast<int>(e.symbol));
        CHECK(joined == expected);  // hop == window: every event exactly once
    }
}

TEST_CASE("millisecond pads must divide evenly") {
    CHECK(data::samples_from_ms(0.5, 2000) == 1);
    CHECK_THROWS_AS(data::samples_from_ms(0.3, 2000), Error);
}

TEST_CASE("synthetic generation is a pure function of its config") {
    data::SynthConfig cfg = fixtures::tiny_synth_config();
    cfg.session_duration_s = 2.0;
    const std::string d1 = fixtures::temp_dir("synth-a");
    const std::string d2 = fixtures::temp_dir("synth-b");
    data::synth_dataset(cfg, d1);
    data::synth_dataset(cfg, d2);
    for (const auto& entry : fs::recursive_directory_iterator(d1)) {
        if (!entry.is_regular_file()) continue;
        const std::string rel = fs::relative(entry.path(), d1).string();
        CHECK(read_bytes(entry.path().string()) == read_bytes((fs::path(d2) / rel).string()));
    }
}

TEST_CASE("noise-free zero-jitter renderings are user independent") {
    data::SynthConfig cfg = fixtures::tiny_synth_config();
    cfg.noise_std = 0.0;
    cfg.gain_jitter = 0.0;
    const MatF patterns = data::synth_key_patterns(cfg);
    Rng sched_rng(123);
    const auto schedule = data::synth_schedule(cfg, sched_rng);
    REQUIRE(!schedule.empty());
    const std::vector<float> gains_a(cfg.num_channels, 1.0f);
    const std::vector<float> gains_b(cfg.num_channels, 1.0f);
    Rng n1(1), n2(2);  // must be irrelevant at noise_std == 0
    const MatF r1 = data::synth_render(cfg, patterns, gains_a, schedule, n1);
    const MatF r2 = data::synth_render(cfg, patterns, gains_b, schedule, n2);
    CHECK(r1.v == r2.v);
}

TEST_CASE("stored labels recount to the generator schedule") {
    data::SynthConfig cfg = fixtures::tiny_synth_config();
    const std::string dir = fixtures::temp_dir("synth-count");
    const data::SplitManifest manifest = data::synth_dataset(cfg, dir);
    std::size_t total = 0;
    std::size_t sessions = 0;
    for (const auto& [user, split] : manifest.sessions) {
        for (const auto& list : {split.train, split.val, split.test}) {
            for (const std::string& sid : list) {
                const data::Session s = data::load_session(manifest.session_path(user, sid));
                total += s.labels.size();
                ++sessions;
                for (const auto& e : s.labels) {
                    CHECK(e.symbol >= 1);
                    CHECK(e.symbol < static_cast<std::uint32_t>(cfg.vocab_size));
                }
            }
        }
    }
    // keys/minute times duration, within scheduling slack
    const double expected = cfg.keys_per_minute / 60.0 * cfg.session_duration_s *
                            static_cast<double>(sessions);
    CHECK(static_cast<double>(total) > 0.5 * expected);
    CHECK(static_cast<double>(total) < 1.2 * expected);
}

TEST_CASE("vocab below 2 is rejected") {
    data::SynthConfig cfg = fixtures::tiny_synth_config();
    cfg.vocab_size = 1;
    CHECK_THROWS_AS(data::validate_synth_config(cfg), Error);
}

TEST_CASE("split_dataset resolves generic and personalization modes") {
    data::SynthConfig cfg = fixtures::tiny_synth_config();
    cfg.sessions_per_user = 5;  // 1 train / 2 val / 2 test
    cfg.session_duration_s = 1.0;
    const std::string dir = fixtures::temp_dir("split");
    const data::SplitManifest manifest = data::synth_dataset(cfg, dir);

    const auto generic = data::split_dataset(manifest, data::SplitMode::Generic);
    CHECK(generic.train.size() == 2);  // 2 train users x 1 train session
    CHECK(generic.val.size() == 4);
    CHECK(generic.test.size() == 2);  // 1 test user x 2 test sessions
    for (const std::string& p : generic.test) {
        CHECK(p.find("test000") != std::string::npos);
    }

    const std::string held_out = manifest.test_users.front();
    const auto pers = data::split_dataset(manifest, data::SplitMode::Personalization, held_out);
    for (const auto& list : {pers.train, pers.val, pers.test}) {
        for (const std::string& p : list) CHECK(p.find(held_out) != std::string::npos);
    }

    CHECK_THROWS_AS(data::split_dataset(manifest, data::SplitMode::Personalization, "nobody"),
                    Error);
    CHECK_THROWS_AS(
        data::split_dataset(manifest, data::SplitMode::Personalization, manifest.train_users[0]),
        Error);

    data::SplitManifest empty = manifest;
    empty.train_users.clear();
    CHECK_THROWS_AS(data::split_dataset(empty, data::SplitMode::Generic), Error);
}

TEST_CASE("manifest rejects overlapping user sets") {
    const std::string dir = fixtures::temp_dir("manifest-overlap");
    data::SplitManifest m;
    m.train_users = {"alice"};
    m.test_users = {"alice"};
    m.sessions["alice"] = {};
    const std::string path = dir + "/manifest.json";
    data::save_manifest(m, path);
    CHECK_THROWS_AS(data::load_manifest(path), Error);
}

}  // TEST_SUITE
