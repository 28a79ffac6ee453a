#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace flowmend {

// Row-major raster of real values. Frames hold intensities with nominal range
// [0,255]; solver grids hold whatever the problem needs. Quantization to 8 bit
// happens only at file output.
struct Grid {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Grid() = default;
    Grid(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

    double& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }

    size_t size() const { return data.size(); }
    bool same_shape(const Grid& o) const { return width == o.width && height == o.height; }
};

using Frame = Grid;

// Location r = [h, v]: h runs along rows (columns), v down the rows.
struct PixelPos {
    double h = 0.0;
    double v = 0.0;
};

struct DisplacementVector {
    double dh = 0.0;
    double dv = 0.0;
};

struct SpatialGradient {
    double gh = 0.0;
    double gv = 0.0;
};

// Per-pixel displacement vectors with validity flags. Invalid pixels carry the
// zero vector.
struct MotionField {
    int width = 0;
    int height = 0;
    std::vector<DisplacementVector> vectors;
    std::vector<uint8_t> valid;

    MotionField() = default;
    MotionField(int w, int h)
        : width(w), height(h),
          vectors(static_cast<size_t>(w) * h),
          valid(static_cast<size_t>(w) * h, 0) {}

    DisplacementVector& vec(int x, int y) { return vectors[static_cast<size_t>(y) * width + x]; }
    const DisplacementVector& vec(int x, int y) const { return vectors[static_cast<size_t>(y) * width + x]; }
    bool is_valid(int x, int y) const { return valid[static_cast<size_t>(y) * width + x] != 0; }
    void set(int x, int y, DisplacementVector d, bool ok) {
        size_t i = static_cast<size_t>(y) * width + x;
        vectors[i] = d;
        valid[i] = ok ? 1 : 0;
    }
};

// Bilinear interpolation of the four surrounding pixels; positions outside the
// frame are clamped to the nearest edge pixel, so this is total.
double bilinear_sample(const Frame& frame, PixelPos pos);

// Central difference of the bilinearly interpolated intensity with unit step;
// one-sided at positions within one pixel of the border.
SpatialGradient spatial_gradient(const Frame& frame, PixelPos pos);

// Displaced frame difference I_k(r) - I_{k-1}(r - d). pos is expected to be an
// integer pixel inside curr.
double dfd(const Frame& curr, const Frame& prev, PixelPos pos, DisplacementVector d);

// Motion compensation: output(r) = prev(r - d(r)) for valid pixels, prev(r)
// otherwise. Field dimensions must match the frame.
Frame warp_frame(const Frame& prev, const MotionField& field);

} // namespace flowmend
