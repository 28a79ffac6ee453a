#include "flowmend/imaging.hpp"

#include "flowmend/errors.hpp"

#include <algorithm>
#include <cmath>

namespace flowmend {

namespace {

double clampd(double x, double lo, double hi) {
    return x < lo ? lo : (x > hi ? hi : x);
}

} // namespace

double bilinear_sample(const Frame& frame, PixelPos pos) {
    const double x = clampd(pos.h, 0.0, frame.width - 1.0);
    const double y = clampd(pos.v, 0.0, frame.height - 1.0);

    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, frame.width - 1);
    const int y1 = std::min(y0 + 1, frame.height - 1);

    const double fx = x - x0;
    const double fy = y - y0;

    const double top = frame.at(x0, y0) * (1.0 - fx) + frame.at(x1, y0) * fx;
    const double bot = frame.at(x0, y1) * (1.0 - fx) + frame.at(x1, y1) * fx;
    return top * (1.0 - fy) + bot * fy;
}

SpatialGradient spatial_gradient(const Frame& frame, PixelPos pos) {
    SpatialGradient g;

    const double h = pos.h;
    const double v = pos.v;
    const double wmax = frame.width - 1.0;
    const double hmax = frame.height - 1.0;

    if (h - 1.0 >= 0.0 && h + 1.0 <= wmax) {
        g.gh = 0.5 * (bilinear_sample(frame, {h + 1.0, v}) - bilinear_sample(frame, {h - 1.0, v}));
    } else if (h - 1.0 < 0.0) {
        g.gh = bilinear_sample(frame, {h + 1.0, v}) - bilinear_sample(frame, {h, v});
    } else {
        g.gh = bilinear_sample(frame, {h, v}) - bilinear_sample(frame, {h - 1.0, v});
    }

    if (v - 1.0 >= 0.0 && v + 1.0 <= hmax) {
        g.gv = 0.5 * (bilinear_sample(frame, {h, v + 1.0}) - bilinear_sample(frame, {h, v - 1.0}));
    } else if (v - 1.0 < 0.0) {
        g.gv = bilinear_sample(frame, {h, v + 1.0}) - bilinear_sample(frame, {h, v});
    } else {
        g.gv = bilinear_sample(frame, {h, v}) - bilinear_sample(frame, {h, v - 1.0});
    }

    return g;
}

double dfd(const Frame& curr, const Frame& prev, PixelPos pos, DisplacementVector d) {
    const int x = static_cast<int>(std::llround(pos.h));
    const int y = static_cast<int>(std::llround(pos.v));
    return curr.at(x, y) - bilinear_sample(prev, {pos.h - d.dh, pos.v - d.dv});
}

Frame warp_frame(const Frame& prev, const MotionField& field) {
    if (field.width != prev.width || field.height != prev.height)
        throw ShapeError("warp_frame: field dimensions do not match frame");

    Frame out(prev.width, prev.height);
    for (int y = 0; y < prev.height; ++y) {
        for (int x = 0; x < prev.width; ++x) {
            if (field.is_valid(x, y)) {
                const DisplacementVector& d = field.vec(x, y);
                out.at(x, y) = bilinear_sample(prev, {x - d.dh, y - d.dv});
            } else {
                out.at(x, y) = prev.at(x, y);
            }
        }
    }
    return out;
}

} // namespace flowmend
