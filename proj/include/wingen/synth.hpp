#pragma once

#include <cstdint>
#include <cstdlib>
#include <string>
#include <vector>

#include "wingen/audio.hpp"
#include "wingen/codec.hpp"

namespace wingen {

/// Half-open pixel rectangle [y0, y1) x [x0, x1).
struct Box {
    int y0 = 0, x0 = 0, y1 = 0, x1 = 0;
    bool empty() const { return y1 <= y0 || x1 <= x0; }
    bool contains(const Box& o) const { return o.y0 >= y0 && o.x0 >= x0 && o.y1 <= y1 && o.x1 <= x1; }
};

struct FixtureSpec {
    std::size_t frames = 64;
    double fps = 25.0;
    std::size_t height = 64, width = 64;
    std::uint32_t sample_rate = 16000;
    double gain = 2.0;  // mouth aperture per unit of audio RMS
    // Audio RMS per burst block; empty -> seeded levels in [0, max_level]
    std::vector<double> burst_levels;
    std::size_t block_frames = 4;
    double max_level = 0.5;
    int audio_delay = 0;  // audio lags the mouth by this many frames
    bool silent = false;
    std::uint64_t seed = 1;
};

struct FixtureRecord {
    PixelVideo video;
    AudioTrack audio;
    std::vector<double> aperture;  // per frame, what the mouth shows
    std::vector<double> envelope;  // per frame RMS of `audio`
    Box face, body, mouth;
    DenseArray face_mask, body_mask;  // [frames, H, W] in {0, 1}
    std::string prompt;
};

/// Deterministic talking-head fixture: a static subject whose mouth brightness follows
/// the energy of band-limited audio bursts.
FixtureRecord make_fixture(const FixtureSpec& spec);

/// Pixel box -> latent-grid mask [H/sh, W/sw]; a cell is set when the box overlaps it.
DenseArray latent_mask(const Box& box, std::size_t height, std::size_t width, Triple stride);

/// Mean RGB intensity inside `region` for every frame.
std::vector<double> region_intensity(const PixelVideo& video, const Box& region);

struct Correlation {
    double r = 0.0;
    bool degenerate = false;  // a constant input; r reported as 0
};

Correlation pearson(const std::vector<double>& a, const std::vector<double>& b);

/// Pearson correlation of the region's per-frame intensity with the audio RMS envelope.
Correlation sync_correlation(const PixelVideo& video, const AudioTrack& audio, const Box& region);

struct SyncOffset {
    int offset = 0;  // audio lags video by this many frames
    double confidence = 0.0;
    std::vector<double> curve;  // correlation per offset, -max_offset .. max_offset
};

/// Scans integer offsets; confidence is the Fisher-z of the peak correlation minus the
/// mean Fisher-z of the others.
SyncOffset sync_offset(const PixelVideo& video, const AudioTrack& audio, const Box& region, int max_offset = 15);

/// Gate used when filtering data by sync quality.
struct SyncGate {
    int max_abs_offset = 3;
    double min_confidence = 1.6;
    bool passes(const SyncOffset& s) const { return std::abs(s.offset) <= max_abs_offset && s.confidence > min_confidence; }
};

/// "WGV1" container: magic, u32 frames, channels, height, width, f32 fps, f32 planes.
void write_video(const std::string& path, const PixelVideo& video);
PixelVideo read_video(const std::string& path);

/// Fixture side data (boxes, aperture, envelope, prompt) as JSON lines.
void write_fixture_records(const std::string& path, const FixtureRecord& fx);

}  // namespace wingen
