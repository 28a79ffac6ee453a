#include "flowmend/metrics_io.hpp"

#include "flowmend/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace flowmend {

namespace {

uint8_t quantize(double v) {
    const double clamped = std::clamp(v, 0.0, 255.0);
    return static_cast<uint8_t>(std::llround(clamped));
}

// PGM headers allow '#' comments anywhere whitespace may appear.
int read_pgm_int(std::istream& in, const char* what) {
    for (;;) {
        const int c = in.peek();
        if (c == EOF) throw MalformedHeaderError(std::string("read_pgm: missing ") + what);
        if (c == '#') {
            std::string line;
            std::getline(in, line);
            continue;
        }
        if (std::isspace(c)) {
            in.get();
            continue;
        }
        break;
    }
    int value = 0;
    if (!(in >> value)) throw MalformedHeaderError(std::string("read_pgm: bad ") + what);
    return value;
}

} // namespace

double psnr(const Frame& original, const Frame& restored) {
    if (!original.same_shape(restored)) throw ShapeError("psnr: frame shapes differ");
    double sse = 0.0;
    for (size_t i = 0; i < original.size(); ++i) {
        const double d = original.data[i] - restored.data[i];
        sse += d * d;
    }
    if (sse == 0.0) return 99.0;
    const double mn = static_cast<double>(original.size());
    return std::min(99.0, 10.0 * std::log10(255.0 * 255.0 * mn / sse));
}

Frame read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_pgm: cannot open " + path);

    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (in.gcount() != 2 || magic[0] != 'P' || magic[1] != '5')
        throw MalformedHeaderError("read_pgm: not a binary PGM (P5): " + path);

    const int width = read_pgm_int(in, "width");
    const int height = read_pgm_int(in, "height");
    const int maxval = read_pgm_int(in, "maxval");
    if (width < 1 || height < 1) throw MalformedHeaderError("read_pgm: bad dimensions in " + path);
    if (maxval != 255) throw MalformedHeaderError("read_pgm: unsupported maxval in " + path);
    in.get(); // single whitespace after maxval

    std::vector<uint8_t> raw(static_cast<size_t>(width) * height);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<size_t>(in.gcount()) != raw.size())
        throw TruncatedDataError("read_pgm: truncated raster in " + path);

    Frame f(width, height);
    for (size_t i = 0; i < raw.size(); ++i) f.data[i] = raw[i];
    return f;
}

void write_pgm(const Frame& frame, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_pgm: cannot open " + path);
    out << "P5\n" << frame.width << " " << frame.height << "\n255\n";
    std::vector<uint8_t> raw(frame.size());
    for (size_t i = 0; i < raw.size(); ++i) raw[i] = quantize(frame.data[i]);
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("write_pgm: write failed for " + path);
}

Frame read_yuv420_luma(const std::string& path, int width, int height, int frame_index) {
    if (width < 1 || height < 1) throw ShapeError("read_yuv420_luma: bad geometry");
    if (frame_index < 0) throw FrameIndexError("read_yuv420_luma: negative frame index");

    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_yuv420_luma: cannot open " + path);
    in.seekg(0, std::ios::end);
    const uint64_t file_size = static_cast<uint64_t>(in.tellg());

    const uint64_t luma = static_cast<uint64_t>(width) * height;
    const uint64_t frame_bytes = luma * 3 / 2;
    if (file_size < frame_bytes)
        throw TruncatedDataError("read_yuv420_luma: file shorter than one frame: " + path);
    if (static_cast<uint64_t>(frame_index) >= file_size / frame_bytes)
        throw FrameIndexError("read_yuv420_luma: frame index out of range: " + path);

    in.seekg(static_cast<std::streamoff>(frame_bytes * frame_index));
    std::vector<uint8_t> raw(luma);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(luma));
    if (static_cast<uint64_t>(in.gcount()) != luma)
        throw TruncatedDataError("read_yuv420_luma: truncated luma plane in " + path);

    Frame f(width, height);
    for (size_t i = 0; i < raw.size(); ++i) f.data[i] = raw[i];
    return f;
}

void write_report(std::span<const ConcealmentReport> reports, const std::string& path) {
    std::vector<ConcealmentReport> sorted(reports.begin(), reports.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const ConcealmentReport& a, const ConcealmentReport& b) {
                         if (a.frame_index != b.frame_index) return a.frame_index < b.frame_index;
                         return std::string(method_name(a.method)) < method_name(b.method);
                     });

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_report: cannot open " + path);
    out << "frame,method,psnr_db,lost_mbs,outer_iters,final_q\n";
    char line[256];
    for (const ConcealmentReport& r : sorted) {
        std::snprintf(line, sizeof(line), "%d,%s,%.6f,%d,%d,%.6f\n", r.frame_index,
                      method_name(r.method), r.psnr_db, r.lost_mb_count, r.solver_outer_iters,
                      r.final_q);
        out << line;
    }
    if (!out) throw IoError("write_report: write failed for " + path);
}

LossMask read_loss_mask(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("read_loss_mask: cannot open " + path);
    LossMask m;
    if (!(in >> m.mb_size >> m.mb_cols >> m.mb_rows))
        throw MalformedHeaderError("read_loss_mask: bad header in " + path);
    if (m.mb_size < 1 || m.mb_cols < 1 || m.mb_rows < 1)
        throw MalformedHeaderError("read_loss_mask: bad geometry in " + path);
    m.lost.assign(static_cast<size_t>(m.mb_cols) * m.mb_rows, 0);
    long long mba = 0;
    long long prev = -1;
    while (in >> mba) {
        if (mba < 0 || mba >= m.block_count())
            throw MalformedHeaderError("read_loss_mask: MBA out of range in " + path);
        if (mba <= prev)
            throw MalformedHeaderError("read_loss_mask: MBAs must be ascending in " + path);
        m.lost[static_cast<size_t>(mba)] = 1;
        prev = mba;
    }
    if (!in.eof()) throw MalformedHeaderError("read_loss_mask: trailing garbage in " + path);
    return m;
}

void write_loss_mask(const LossMask& mask, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_loss_mask: cannot open " + path);
    out << mask.mb_size << " " << mask.mb_cols << " " << mask.mb_rows << "\n";
    for (int mba = 0; mba < mask.block_count(); ++mba)
        if (mask.lost[static_cast<size_t>(mba)]) out << mba << "\n";
    if (!out) throw IoError("write_loss_mask: write failed for " + path);
}

SequenceSource open_sequence(const std::string& path, bool raw, int raw_width, int raw_height,
                             int max_frames) {
    namespace fs = std::filesystem;
    SequenceSource src;
    src.path = path;

    if (raw) {
        if (raw_width < 1 || raw_height < 1)
            throw ShapeError("open_sequence: raw input needs a WxH geometry");
        if (!fs::is_regular_file(path)) throw IoError("open_sequence: no such file: " + path);
        src.format = SequenceSource::Format::raw_yuv420;
        src.width = raw_width;
        src.height = raw_height;
        const uint64_t frame_bytes = static_cast<uint64_t>(raw_width) * raw_height * 3 / 2;
        const uint64_t size = fs::file_size(path);
        src.frame_count = static_cast<int>(size / frame_bytes);
    } else {
        if (!fs::is_directory(path)) throw IoError("open_sequence: not a directory: " + path);
        for (const auto& entry : fs::directory_iterator(path)) {
            if (!entry.is_regular_file()) continue;
            if (entry.path().extension() == ".pgm") src.pgm_files.push_back(entry.path().string());
        }
        std::sort(src.pgm_files.begin(), src.pgm_files.end());
        if (src.pgm_files.empty()) throw IoError("open_sequence: no .pgm files in " + path);
        const Frame first = read_pgm(src.pgm_files.front());
        src.width = first.width;
        src.height = first.height;
        src.frame_count = static_cast<int>(src.pgm_files.size());
    }

    if (max_frames >= 0) src.frame_count = std::min(src.frame_count, max_frames);
    if (src.frame_count < 1) throw IoError("open_sequence: no frames in " + path);
    return src;
}

Frame load_frame(const SequenceSource& source, int index) {
    if (index < 0 || index >= source.frame_count)
        throw FrameIndexError("load_frame: frame index out of range");
    if (source.format == SequenceSource::Format::raw_yuv420)
        return read_yuv420_luma(source.path, source.width, source.height, index);
    Frame f = read_pgm(source.pgm_files[static_cast<size_t>(index)]);
    if (f.width != source.width || f.height != source.height)
        throw ShapeError("load_frame: sequence frames must share one resolution");
    return f;
}

} // namespace flowmend
