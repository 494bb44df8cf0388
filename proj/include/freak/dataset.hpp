#pragma once

#include <string>
#include <vector>

#include "freak/rng.hpp"
#include "freak/tensor.hpp"

namespace freak {

// Axis-aligned head rectangle, half-open [top,bottom) x [left,right).
struct HeadBox {
    int top = 0, left = 0, bottom = 0, right = 0;
};

struct Frame {
    Tensor<float> pixels;  // [3,H,W] in [0,1]
    int index = 0;
    HeadBox head_box;
};

void validate_frame(const Frame& f);

enum class MaskKind { LowerHalf, FullHead };

// Audio features for one frame: a 16-step window of [2,1024] feature rows,
// reshaped row-major to the cubic audio-encoder input.
struct AudioFeatureWindow {
    Tensor<float> raw;       // [16,2,1024]
    Tensor<float> reshaped;  // [32,32,32], same storage order
};

struct Sample {
    Frame reference;
    Frame masked;
    MaskKind mask = MaskKind::LowerHalf;
    AudioFeatureWindow audio;
    Frame target;
};

// Zeroes the masked region exactly; every other pixel is bit-identical.
// LowerHalf zeroes rows floor((top+bottom)/2)..bottom-1 within the box
// columns; FullHead zeroes the whole box.
Frame apply_mask(const Frame& frame, MaskKind kind);

// Window [j-8, j+7] of the [T,2,1024] feature track, out-of-range rows
// clamped to the first/last row.
AudioFeatureWindow window_audio(const Tensor<float>& features, int frame_index);

// Target uniform, reference uniform re-drawn while equal to the target,
// mask kind Bernoulli(0.5). Deterministic for a given generator state.
Sample sample_training_pair(const std::vector<Frame>& video, const Tensor<float>& features,
                            Rng& rng);

// ---- synthetic talking-portrait generator ----

struct SynthConfig {
    int frames = 64;
    int size = 64;  // square, one of 32/64/128
    uint64_t seed = 0;
};

struct SyntheticData {
    std::vector<Frame> frames;
    Tensor<float> features;  // [T,2,1024]
};

// Mouth aperture m(t) in [0,1]; t may be fractional (features sample at
// half-frame offsets). Closed form:
//   m(t) = clamp(0.5 + 0.32 sin(2 pi 0.06 t + p1) + 0.18 sin(2 pi 0.17 t + p2), 0, 1)
// with phases p1, p2 drawn once from the dataset seed.
double synthetic_mouth_aperture(const SynthConfig& cfg, double t);

// Mouth ellipse half-height in pixels at frame t: 0.08 * size * m(t).
double synthetic_mouth_half_height(const SynthConfig& cfg, double t);

// Exact 8-bit color of the rendered mouth interior.
void synthetic_mouth_color(const SynthConfig& cfg, unsigned char rgb[3]);

// Deterministic portrait: static textured background, shaded head ellipse
// with a seed-specific palette, and a mouth whose aperture follows m(t).
// Feature rows encode 2*m-1 in dims [0,64) of both sub-steps (plus small
// noise); the remaining dims are pure noise.
SyntheticData generate_synthetic_dataset(const SynthConfig& cfg);

// ---- on-disk dataset ----

std::vector<Frame> load_frames(const std::string& dir);                 // frame_%06d.png
std::vector<HeadBox> load_head_boxes(const std::string& path, int expected_count);
Tensor<float> load_features(const std::string& path);                   // FRK1 [T,2,1024]

struct Dataset {
    std::vector<Frame> frames;
    Tensor<float> features;
};

// dir must hold frame_%06d.png, boxes.txt, features.frk1.
Dataset load_dataset(const std::string& dir);

void save_dataset(const std::string& dir, const SyntheticData& data);
void save_frames(const std::string& dir, const std::vector<Frame>& frames);

std::string frame_filename(int index);

}  // namespace freak
