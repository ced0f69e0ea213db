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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "emgseq/common.hpp"
#include "emgseq/mat.hpp"

namespace emgseq::data {

constexpr int kBandSize = 16;  // electrodes per wrist band

/// One labeled keystroke. `symbol` is a token id >= 1 (0 is the CTC blank and
/// never appears as a label); `timestamp` is a sample index into the session.
struct KeyEvent {
    std::uint32_t symbol = 0;
    std::uint64_t timestamp = 0;
};

/// One recording: multi-channel raw signal plus timestamped keystroke labels.
/// Immutable after load; safe to share read-only across threads.
struct Session {
    std::string user_id;
    std::string session_id;
    std::uint32_t sample_rate_hz = 2000;
    std::uint32_t num_channels = 32;
    MatF samples;  // [num_samples x num_channels], time-major
    std::vector<KeyEvent> labels;

    std::int64_t num_samples() const { return samples.rows; }
};

/// Throws on any invariant violation (rate, channel multiple of band size,
/// label order / range / blank symbol). Called by save_session and the tests.
void validate_session(const Session& s);

void save_session(const Session& s, const std::string& path);
Session load_session(const std::string& path);

/// A padded window paired with the character targets whose keystrokes fall in
/// its core range [pad_past, pad_past + window_len).
struct WindowedSample {
    MatF signal;  // [(pad_past + window_len + pad_future) x num_channels]
    std::vector<int> target;
    std::int64_t pad_past = 0;
    std::int64_t window_len = 0;
    std::int64_t pad_future = 0;
    std::int64_t core_start = 0;  // sample index in the source session
};

/// Cuts a session into windows whose cores start at 0, hop, 2*hop, ...
/// (ceil(num_samples / hop) windows). Signal outside the session is
/// zero-padded. A window longer than the session yields a single padded
/// window rather than an error.
std::vector<WindowedSample> window_session(const Session& s, std::int64_t window_len,
                                           std::int64_t pad_past, std::int64_t pad_future,
                                           std::int64_t hop);

/// Millisecond-to-sample conversion; ms * rate must divide evenly by 1000.
std::int64_t samples_from_ms(double ms, std::uint32_t sample_rate_hz);

struct UserSessions {
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
};

struct SplitManifest {
    std::vector<std::string> train_users;
    std::vector<std::string> test_users;
    std::map<std::string, UserSessions> sessions;
    std::string root_dir;  // directory the session files live under

    std::string session_path(const std::string& user, const std::string& session_id) const;
};

void save_manifest(const SplitManifest& m, const std::string& path);
SplitManifest load_manifest(const std::string& path);

enum class SplitMode { Generic, Personalization };

struct ResolvedSplit {
    std::vector<std::string> train;  // session file paths
    std::vector<std::string> val;
    std::vector<std::string> test;
};

/// Generic: train users' train sessions / train users' val sessions / test
/// users' test sessions. Personalization: the single held-out user's own
/// train/val/test sessions (user must be in test_users).
ResolvedSplit split_dataset(const SplitManifest& m, SplitMode mode,
                            const std::string& user_id = "");

/// Adapter point for external corpora: convert offline to the session
/// container, or implement this interface directly against another store.
class SessionSource {
public:
    virtual ~SessionSource() = default;
    virtual std::size_t num_sessions() const = 0;
    virtual Session load(std::size_t index) const = 0;
};

class FileSessionSource : public SessionSource {
public:
    explicit FileSessionSource(std::vector<std::string> paths) : paths_(std::move(paths)) {}
    std::size_t num_sessions() const override { return paths_.size(); }
    Session load(std::size_t index) const override { return load_session(paths_.at(index)); }
    const std::vector<std::string>& paths() const { return paths_; }

private:
    std::vector<std::string> paths_;
};

// ----------------------------------------------------------------------------
// Synthetic typing generator. Each key symbol is rendered as a short burst
// with a symbol-specific spatial pattern across channels, plus Gaussian noise
// and per-user channel gains. Learnable but user-dependent, which is what the
// generic / personalization split structure needs.
// ----------------------------------------------------------------------------
struct SynthConfig {
    int num_train_users = 10;
    int num_test_users = 2;
    int sessions_per_user = 6;
    double session_duration_s = 10.0;
    int vocab_size = 8;  // blank + (vocab_size - 1) key symbols
    double keys_per_minute = 150.0;
    double noise_std = 0.2;
    double gain_jitter = 0.2;
    /// Per-(user, key) deformation of the key's spatial pattern. Unlike gain
    /// jitter this cannot be normalized away, so it bounds how well a generic
    /// model can do on an unseen user and gives personalization real headroom.
    double pattern_jitter = 0.0;
    std::uint64_t seed = 0;

    std::uint32_t sample_rate_hz = 2000;
    std::uint32_t num_channels = 32;
    double burst_ms = 100.0;
    /// When > 0, key onsets are kept clear of multiples of this many samples
    /// so that a burst never straddles a window boundary of the same size.
    std::int64_t onset_grid = 0;
    /// Circular within-band channel shift applied to held-out (test) users'
    /// signals, simulating a device worn one electrode off. Train users are
    /// rendered unshifted.
    int test_band_offset = 0;
};

void validate_synth_config(const SynthConfig& cfg);

/// Deterministic key onset schedule for one session.
std::vector<KeyEvent> synth_schedule(const SynthConfig& cfg, Rng& rng);

/// Symbol spatial patterns, one unit-norm row per key symbol (row 0 unused).
MatF synth_key_patterns(const SynthConfig& cfg);

/// The per-user variant: each key's pattern deformed by pattern_jitter in a
/// user-specific direction, then re-normalized. user_index counts train users
/// first, then test users.
MatF synth_user_patterns(const SynthConfig& cfg, const MatF& base, int user_index);

/// Renders a schedule into a signal matrix. `gains` has one entry per
/// channel; `noise_rng` is only consumed when noise_std > 0.
MatF synth_render(const SynthConfig& cfg, const MatF& patterns,
                  const std::vector<float>& gains, const std::vector<KeyEvent>& schedule,
                  Rng& noise_rng);

/// Writes the full dataset (session files + manifest.json) under out_dir and
/// returns the manifest. A pure function of cfg: the same config produces
/// byte-identical files.
SplitManifest synth_dataset(const SynthConfig& cfg, const std::string& out_dir);

}  // namespace emgseq::data
