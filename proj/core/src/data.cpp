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

#include "emgseq/data.hpp"

#include "emgseq/augment.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace emgseq::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'E', 'M', 'G', 'S', 'E', 'Q', '0', '1'};

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

void write_f32(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(out, bits);
}

bool read_u32(std::istream& in, std::uint32_t& v) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
    v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return true;
}

bool read_u64(std::istream& in, std::uint64_t& v) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) return false;
    v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return true;
}

bool read_f32(std::istream& in, float& v) {
    std::uint32_t bits;
    if (!read_u32(in, bits)) return false;
    std::memcpy(&v, &bits, 4);
    return true;
}

}  // namespace

void validate_session(const Session& s) {
    require(s.sample_rate_hz > 0, "invalid_session", "sample_rate_hz must be positive");
    require(s.num_channels > 0 && s.num_channels % kBandSize == 0, "invalid_session",
            "num_channels must be a positive multiple of " + std::to_string(kBandSize));
    require(s.samples.cols == static_cast<std::int64_t>(s.num_channels), "invalid_session",
            "sample matrix has " + std::to_string(s.samples.cols) + " channels, expected " +
                std::to_string(s.num_channels));
    std::uint64_t prev = 0;
    bool first = true;
    for (const KeyEvent& e : s.labels) {
        require(e.symbol != 0, "blank_label", "label symbol 0 is reserved for the CTC blank");
        require(e.timestamp < static_cast<std::uint64_t>(s.num_samples()), "label_out_of_range",
                "label timestamp " + std::to_string(e.timestamp) + " outside [0, " +
                    std::to_string(s.num_samples()) + ")");
        require(first || e.timestamp >= prev, "unsorted_labels",
                "labels must be sorted by timestamp ascending");
        prev = e.timestamp;
        first = false;
    }
}

void save_session(const Session& s, const std::string& path) {
    validate_session(s);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), "io_error", "cannot open for writing: " + path);

    json header = {
        {"user_id", s.user_id},
        {"session_id", s.session_id},
        {"sample_rate_hz", s.sample_rate_hz},
        {"num_channels", s.num_channels},
        {"num_samples", s.num_samples()},
        {"num_events", s.labels.size()},
    };
    const std::string header_str = header.dump();

    out.write(kMagic, 8);
    write_u32(out, static_cast<std::uint32_t>(header_str.size()));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    out.write(reinterpret_cast<const char*>(s.samples.v.data()),
              static_cast<std::streamsize>(s.samples.v.size() * sizeof(float)));
    for (const KeyEvent& e : s.labels) {
        write_u32(out, e.symbol);
        write_u64(out, e.timestamp);
    }
    require(out.good(), "io_error", "write failed: " + path);
}

Session load_session(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "io_error", "cannot open: " + path);

    char magic[8];
    require(static_cast<bool>(in.read(magic, 8)) && std::memcmp(magic, kMagic, 8) == 0,
            "bad_magic", "bad magic bytes in " + path);

    std::uint32_t header_len = 0;
    require(read_u32(in, header_len), "bad_header", "truncated header length in " + path);
    std::string header_str(header_len, '\0');
    require(static_cast<bool>(in.read(header_str.data(), header_len)), "bad_header",
            "truncated header in " + path);

    json header;
    try {
        header = json::parse(header_str);
    } catch (const json::exception& e) {
        fail("bad_header", std::string("header is not valid JSON: ") + e.what());
    }

    Session s;
    try {
        s.user_id = header.at("user_id").get<std::string>();
        s.session_id = header.at("session_id").get<std::string>();
        s.sample_rate_hz = header.at("sample_rate_hz").get<std::uint32_t>();
        s.num_channels = header.at("num_channels").get<std::uint32_t>();
    } catch (const json::exception& e) {
        fail("bad_header", std::string("missing header field: ") + e.what());
    }
    const auto num_samples = header.at("num_samples").get<std::int64_t>();
    const auto num_events = header.at("num_events").get<std::int64_t>();
    require(num_samples >= 0 && num_events >= 0, "bad_header", "negative counts in header");

    s.samples = MatF(num_samples, s.num_channels);
    const std::streamsize sample_bytes =
        static_cast<std::streamsize>(s.samples.v.size() * sizeof(float));
    require(static_cast<bool>(in.read(reinterpret_cast<char*>(s.samples.v.data()), sample_bytes)),
            "truncated_samples", "sample block shorter than header promises in " + path);
    if constexpr (std::endian::native == std::endian::big) {
        for (float& f : s.samples.v) {
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            bits = __builtin_bswap32(bits);
            std::memcpy(&f, &bits, 4);
        }
    }

    s.labels.resize(static_cast<std::size_t>(num_events));
    for (KeyEvent& e : s.labels) {
        require(read_u32(in, e.symbol) && read_u64(in, e.timestamp), "truncated_events",
                "event block shorter than header promises in " + path);
    }
    validate_session(s);
    return s;
}

std::vector<WindowedSample> window_session(const Session& s, std::int64_t window_len,
                                           std::int64_t pad_past, std::int64_t pad_future,
                                           std::int64_t hop) {
    require(window_len > 0, "bad_window", "window_len must be positive");
    require(hop > 0, "bad_window", "hop must be positive");
    require(pad_past >= 0 && pad_future >= 0, "bad_window", "pads must be non-negative");

    const std::int64_t n = s.num_samples();
    const std::int64_t channels = s.samples.cols;
    const std::int64_t num_windows = (n + hop - 1) / hop;
    const std::int64_t total_len = pad_past + window_len + pad_future;

    std::vector<WindowedSample> out;
    out.reserve(static_cast<std::size_t>(num_windows));

    std::size_t event_cursor = 0;
    for (std::int64_t w = 0; w < num_windows; ++w) {
        const std::int64_t core_start = w * hop;
        WindowedSample ws;
        ws.pad_past = pad_past;
        ws.window_len = window_len;
        ws.pad_future = pad_future;
        ws.core_start = core_start;
        ws.signal = MatF(total_len, channels);
        const std::int64_t src_begin = core_start - pad_past;
        for (std::int64_t r = 0; r < total_len; ++r) {
            const std::int64_t src = src_begin + r;
            if (src >= 0 && src < n) {
                std::memcpy(ws.signal.row(r), s.samples.row(src),
                            static_cast<std::size_t>(channels) * sizeof(float));
            }
        }
        // Labels are sorted, so a single cursor walks them once per session.
        while (event_cursor < s.labels.size() &&
               s.labels[event_cursor].timestamp < static_cast<std::uint64_t>(core_start)) {
            ++event_cursor;
        }
        std::size_t cursor = event_cursor;
        while (cursor < s.labels.size() &&
               s.labels[cursor].timestamp < static_cast<std::uint64_t>(core_start + window_len)) {
            ws.target.push_back(static_cast<int>(s.labels[cursor].symbol));
            ++cursor;
        }
        out.push_back(std::move(ws));
    }
    return out;
}

std::int64_t samples_from_ms(double ms, std::uint32_t sample_rate_hz) {
    const double scaled = ms * static_cast<double>(sample_rate_hz);
    const double samples = scaled / 1000.0;
    const double rounded = std::round(samples);
    require(std::abs(samples - rounded) < 1e-9, "bad_window",
            std::to_string(ms) + " ms does not map to a whole number of samples at " +
                std::to_string(sample_rate_hz) + " Hz");
    return static_cast<std::int64_t>(rounded);
}

std::string SplitManifest::session_path(const std::string& user,
                                        const std::string& session_id) const {
    return (fs::path(root_dir) / user / (session_id + ".emgseq")).string();
}

void save_manifest(const SplitManifest& m, const std::string& path) {
    json sessions = json::object();
    for (const auto& [user, split] : m.sessions) {
        sessions[user] = {{"train", split.train}, {"val", split.val}, {"test", split.test}};
    }
    json doc = {
        {"train_users", m.train_users},
        {"test_users", m.test_users},
        {"sessions", sessions},
    };
    std::ofstream out(path, std::ios::trunc);
    require(out.good(), "io_error", "cannot open for writing: " + path);
    out << doc.dump(2) << "\n";
    require(out.good(), "io_error", "write failed: " + path);
}

SplitManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "io_error", "cannot open: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        fail("bad_manifest", std::string("manifest is not valid JSON: ") + e.what());
    }
    SplitManifest m;
    try {
        m.train_users = doc.at("train_users").get<std::vector<std::string>>();
        m.test_users = doc.at("test_users").get<std::vector<std::string>>();
        for (const auto& [user, split] : doc.at("sessions").items()) {
            UserSessions us;
            us.train = split.at("train").get<std::vector<std::string>>();
            us.val = split.at("val").get<std::vector<std::string>>();
            us.test = split.at("test").get<std::vector<std::string>>();
            m.sessions[user] = std::move(us);
        }
    } catch (const json::exception& e) {
        fail("bad_manifest", std::string("missing manifest field: ") + e.what());
    }
    for (const std::string& u : m.train_users) {
        require(std::find(m.test_users.begin(), m.test_users.end(), u) == m.test_users.end(),
                "bad_manifest", "user " + u + " appears in both train_users and test_users");
    }
    m.root_dir = fs::path(path).parent_path().string();
    return m;
}

ResolvedSplit split_dataset(const SplitManifest& m, SplitMode mode, const std::string& user_id) {
    ResolvedSplit out;
    if (mode == SplitMode::Generic) {
        require(!m.train_users.empty(), "bad_manifest", "manifest has no train users");
        for (const std::string& u : m.train_users) {
            const auto it = m.sessions.find(u);
            require(it != m.sessions.end(), "bad_manifest", "no sessions listed for user " + u);
            for (const auto& sid : it->second.train) out.train.push_back(m.session_path(u, sid));
            for (const auto& sid : it->second.val) out.val.push_back(m.session_path(u, sid));
        }
        for (const std::string& u : m.test_users) {
            const auto it = m.sessions.find(u);
            require(it != m.sessions.end(), "bad_manifest", "no sessions listed for user " + u);
            for (const auto& sid : it->second.test) out.test.push_back(m.session_path(u, sid));
        }
        return out;
    }
    require(!user_id.empty(), "bad_split", "personalization mode requires a user id");
    require(std::find(m.train_users.begin(), m.train_users.end(), user_id) == m.train_users.end(),
            "bad_split", "user " + user_id + " is in train_users; personalization targets held-out users");
    const auto it = m.sessions.find(user_id);
    require(it != m.sessions.end() &&
                std::find(m.test_users.begin(), m.test_users.end(), user_id) != m.test_users.end(),
            "unknown_user", "user " + user_id + " not found among test users");
    for (const auto& sid : it->second.train) out.train.push_back(m.session_path(user_id, sid));
    for (const auto& sid : it->second.val) out.val.push_back(m.session_path(user_id, sid));
    for (const auto& sid : it->second.test) out.test.push_back(m.session_path(user_id, sid));
    return out;
}

// ----------------------------------------------------------------------------
// Synthetic generator
// ----------------------------------------------------------------------------

void validate_synth_config(const SynthConfig& cfg) {
    require(cfg.vocab_size >= 2, "bad_synth_config",
            "vocab_size must be >= 2 (blank plus at least one key symbol)");
    require(cfg.num_train_users > 0 && cfg.num_test_users > 0, "bad_synth_config",
            "user counts must be positive");
    require(cfg.sessions_per_user > 0, "bad_synth_config", "sessions_per_user must be positive");
    require(cfg.session_duration_s > 0, "bad_synth_config", "session duration must be positive");
    require(cfg.keys_per_minute > 0, "bad_synth_config", "keys_per_minute must be positive");
    require(cfg.noise_std >= 0, "bad_synth_config", "noise_std must be non-negative");
    require(cfg.gain_jitter >= 0, "bad_synth_config", "gain_jitter must be non-negative");
    require(cfg.pattern_jitter >= 0, "bad_synth_config", "pattern_jitter must be non-negative");
    require(cfg.sample_rate_hz > 0, "bad_synth_config", "sample rate must be positive");
    require(cfg.num_channels > 0 && cfg.num_channels % kBandSize == 0, "bad_synth_config",
            "num_channels must be a positive multiple of " + std::to_string(kBandSize));
    require(cfg.burst_ms > 0, "bad_synth_config", "burst_ms must be positive");
    require(std::abs(cfg.test_band_offset) < kBandSize, "bad_synth_config",
            "test_band_offset magnitude must be below the band size");
}

namespace {

std::int64_t burst_samples(const SynthConfig& cfg) {
    return std::max<std::int64_t>(
        1, static_cast<std::int64_t>(std::round(cfg.burst_ms * cfg.sample_rate_hz / 1000.0)));
}

std::int64_t session_samples(const SynthConfig& cfg) {
    return static_cast<std::int64_t>(std::round(cfg.session_duration_s * cfg.sample_rate_hz));
}

std::string user_name(const SynthConfig& cfg, int index) {
    const bool train = index < cfg.num_train_users;
    const int local = train ? index : index - cfg.num_train_users;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%03d", train ? "train" : "test", local);
    return buf;
}

}  // namespace

std::vector<KeyEvent> synth_schedule(const SynthConfig& cfg, Rng& rng) {
    const std::int64_t n = session_samples(cfg);
    const std::int64_t burst = burst_samples(cfg);
    const double interval = cfg.sample_rate_hz * 60.0 / cfg.keys_per_minute;

    std::vector<KeyEvent> events;
    std::int64_t prev_end = -1;
    for (std::int64_t i = 0;; ++i) {
        const double base = (static_cast<double>(i) + 0.5) * interval;
        const double jitter = (rng.next_double() - 0.5) * 0.4 * interval;
        std::int64_t onset = static_cast<std::int64_t>(std::llround(base + jitter));
        const std::uint32_t symbol =
            1 + static_cast<std::uint32_t>(rng.next_below(static_cast<std::uint64_t>(cfg.vocab_size - 1)));
        if (base >= static_cast<double>(n)) break;
        if (cfg.onset_grid > 0) {
            // Keep the burst inside one grid cell.
            const std::int64_t cell = onset / cfg.onset_grid;
            const std::int64_t max_off = cfg.onset_grid - burst - 1;
            if (max_off < 0) continue;
            std::int64_t off = onset - cell * cfg.onset_grid;
            off = std::clamp<std::int64_t>(off, 0, max_off);
            onset = cell * cfg.onset_grid + off;
        }
        if (onset < 0 || onset + burst > n) continue;
        if (onset <= prev_end) continue;  // never overlap the previous burst
        events.push_back(KeyEvent{symbol, static_cast<std::uint64_t>(onset)});
        prev_end = onset + burst - 1;
    }
    return events;
}

MatF synth_key_patterns(const SynthConfig& cfg) {
    Rng rng(Rng::derive(cfg.seed, 0));
    MatF patterns(cfg.vocab_size, cfg.num_channels);
    for (std::int64_t k = 1; k < patterns.rows; ++k) {
        float* row = patterns.row(k);
        double norm_sq = 0.0;
        for (std::int64_t c = 0; c < patterns.cols; ++c) {
            row[c] = static_cast<float>(rng.normal());
            norm_sq += static_cast<double>(row[c]) * row[c];
        }
        const float inv = static_cast<float>(1.0 / std::sqrt(norm_sq));
        for (std::int64_t c = 0; c < patterns.cols; ++c) row[c] *= inv;
    }
    return patterns;
}

MatF synth_user_patterns(const SynthConfig& cfg, const MatF& base, int user_index) {
    if (cfg.pattern_jitter == 0.0) return base;
    Rng rng(Rng::derive(cfg.seed, 500 + static_cast<std::uint64_t>(user_index)));
    MatF out(base.rows, base.cols);
    for (std::int64_t k = 1; k < base.rows; ++k) {
        const float* src = base.row(k);
        float* dst = out.row(k);
        double norm_sq = 0.0;
        for (std::int64_t c = 0; c < base.cols; ++c) {
            dst[c] = src[c] + static_cast<float>(cfg.pattern_jitter * rng.normal() /
                                                 std::sqrt(static_cast<double>(base.cols)));
            norm_sq += static_cast<double>(dst[c]) * dst[c];
        }
        const float inv = static_cast<float>(1.0 / std::sqrt(norm_sq));
        for (std::int64_t c = 0; c < base.cols; ++c) dst[c] *= inv;
    }
    return out;
}

MatF synth_render(const SynthConfig& cfg, const MatF& patterns, const std::vector<float>& gains,
                  const std::vector<KeyEvent>& schedule, Rng& noise_rng) {
    const std::int64_t n = session_samples(cfg);
    const std::int64_t burst = burst_samples(cfg);
    MatF signal(n, cfg.num_channels);
    if (cfg.noise_std > 0) {
        for (float& x : signal.v) {
            x = static_cast<float>(cfg.noise_std * noise_rng.normal());
        }
    }
    const double amp = 4.0;  // burst amplitude relative to unit-norm patterns
    for (const KeyEvent& e : schedule) {
        const float* pattern = patterns.row(static_cast<std::int64_t>(e.symbol));
        for (std::int64_t i = 0; i < burst; ++i) {
            const std::int64_t t = static_cast<std::int64_t>(e.timestamp) + i;
            if (t >= n) break;
            // Hann envelope over the burst.
            const double env =
                0.5 * (1.0 - std::cos(2.0 * 3.141592653589793 * static_cast<double>(i) /
                                      static_cast<double>(burst - 1 > 0 ? burst - 1 : 1)));
            float* row = signal.row(t);
            for (std::int64_t c = 0; c < signal.cols; ++c) {
                row[c] += static_cast<float>(amp * env) * pattern[c] * gains[static_cast<std::size_t>(c)];
            }
        }
    }
    return signal;
}

SplitManifest synth_dataset(const SynthConfig& cfg, const std::string& out_dir) {
    validate_synth_config(cfg);
    fs::create_directories(out_dir);

    const MatF patterns = synth_key_patterns(cfg);
    const int total_users = cfg.num_train_users + cfg.num_test_users;

    SplitManifest manifest;
    manifest.root_dir = out_dir;

    for (int u = 0; u < total_users; ++u) {
        const std::string user = user_name(cfg, u);
        if (u < cfg.num_train_users) {
            manifest.train_users.push_back(user);
        } else {
            manifest.test_users.push_back(user);
        }
        fs::create_directories(fs::path(out_dir) / user);

        Rng gain_rng(Rng::derive(cfg.seed, 1000 + static_cast<std::uint64_t>(u)));
        std::vector<float> gains(cfg.num_channels);
        for (float& g : gains) {
            g = static_cast<float>(std::max(0.05, 1.0 + cfg.gain_jitter * gain_rng.normal()));
        }
        const MatF user_patterns = synth_user_patterns(cfg, patterns, u);

        UserSessions split;
        for (int si = 0; si < cfg.sessions_per_user; ++si) {
            char sid[16];
            std::snprintf(sid, sizeof(sid), "s%02d", si);
            Rng session_rng(Rng::derive(cfg.seed, 1'000'000 + static_cast<std::uint64_t>(u) * 1000 +
                                                      static_cast<std::uint64_t>(si)));
            Session s;
            s.user_id = user;
            s.session_id = sid;
            s.sample_rate_hz = cfg.sample_rate_hz;
            s.num_channels = cfg.num_channels;
            s.labels = synth_schedule(cfg, session_rng);
            s.samples = synth_render(cfg, user_patterns, gains, s.labels, session_rng);
            if (cfg.test_band_offset != 0 && u >= cfg.num_train_users) {
                s.samples = augment::rotate_channels(s.samples, cfg.test_band_offset, kBandSize);
            }
            save_session(s, manifest.session_path(user, sid));

            // Last two sessions are test, the two before are validation, the
            // rest train; degrades to 1/1 and then train-only for short users.
            split.train.push_back(sid);
        }
        const int n = cfg.sessions_per_user;
        int n_test = n >= 5 ? 2 : (n >= 3 ? 1 : 0);
        int n_val = n >= 5 ? 2 : (n >= 2 ? 1 : 0);
        split.test.assign(split.train.end() - n_test, split.train.end());
        split.train.erase(split.train.end() - n_test, split.train.end());
        split.val.assign(split.train.end() - n_val, split.train.end());
        split.train.erase(split.train.end() - n_val, split.train.end());
        manifest.sessions[user] = std::move(split);
    }

    save_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
    return manifest;
}

}  // namespace emgseq::data
