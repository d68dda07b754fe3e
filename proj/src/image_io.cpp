#include "spamlens/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <fstream>

#include "spamlens/gif.hpp"

namespace spamlens {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw ImageError("cannot open " + path.string());
    const std::streamsize size = in.tellg();
    in.seekg(0);
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(size));
    if (size > 0 && !in.read(reinterpret_cast<char*>(buf.data()), size))
        throw ImageError("cannot read " + path.string());
    return buf;
}

namespace {

std::optional<RawImage> from_mat(const cv::Mat& mat) {
    if (mat.empty()) return std::nullopt;
    cv::Mat m8;
    if (mat.depth() == CV_8U) {
        m8 = mat;
    } else if (mat.depth() == CV_16U) {
        mat.convertTo(m8, CV_8U, 1.0 / 257.0);
    } else {
        return std::nullopt;
    }

    RawImage img;
    img.height = m8.rows;
    img.width = m8.cols;
    img.channels = m8.channels();
    if (img.channels != 1 && img.channels != 3 && img.channels != 4) return std::nullopt;
    img.pixels.resize(static_cast<std::size_t>(img.height) * img.width * img.channels);

    // OpenCV decodes color as BGR(A); store RGB(A)
    for (int y = 0; y < img.height; ++y) {
        const std::uint8_t* row = m8.ptr<std::uint8_t>(y);
        std::uint8_t* dst = img.pixels.data() + static_cast<std::size_t>(y) * img.width * img.channels;
        if (img.channels == 1) {
            std::copy(row, row + img.width, dst);
        } else {
            for (int x = 0; x < img.width; ++x) {
                const std::uint8_t* s = row + x * img.channels;
                std::uint8_t* d = dst + x * img.channels;
                d[0] = s[2];
                d[1] = s[1];
                d[2] = s[0];
                if (img.channels == 4) d[3] = s[3];
            }
        }
    }
    return img;
}

cv::Mat to_bgr_mat(const RawImage& img) {
    if (!img.valid() || img.channels != 3) throw ImageError("encode: expected a valid RGB image");
    cv::Mat m(img.height, img.width, CV_8UC3);
    for (int y = 0; y < img.height; ++y) {
        std::uint8_t* row = m.ptr<std::uint8_t>(y);
        const std::uint8_t* src = img.pixels.data() + static_cast<std::size_t>(y) * img.width * 3;
        for (int x = 0; x < img.width; ++x) {
            row[x * 3 + 0] = src[x * 3 + 2];
            row[x * 3 + 1] = src[x * 3 + 1];
            row[x * 3 + 2] = src[x * 3 + 0];
        }
    }
    return m;
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ImageError("cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw ImageError("short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw ImageError("cannot move " + path.string() + " into place: " + ec.message());
    }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::optional<RawImage> decode_image_bytes(const std::vector<std::uint8_t>& bytes) {
    if (bytes.empty()) return std::nullopt;
    if (looks_like_gif(bytes.data(), bytes.size())) {
        try {
            return decode_gif_first_frame(bytes.data(), bytes.size());
        } catch (const ImageError&) {
            return std::nullopt;
        }
    }
    try {
        const cv::Mat mat =
            cv::imdecode(cv::Mat(1, static_cast<int>(bytes.size()), CV_8UC1,
                                 const_cast<std::uint8_t*>(bytes.data())),
                         cv::IMREAD_UNCHANGED);
        return from_mat(mat);
    } catch (const cv::Exception&) {
        return std::nullopt;
    }
}

std::optional<RawImage> decode_image_file(const std::filesystem::path& path) {
    try {
        return decode_image_bytes(read_file_bytes(path));
    } catch (const ImageError&) {
        return std::nullopt;
    }
}

std::vector<std::uint8_t> encode_png(const RawImage& img) {
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", to_bgr_mat(img), out)) throw ImageError("png encoding failed");
    return out;
}

void write_png(const std::filesystem::path& path, const RawImage& img) { write_file_atomic(path, encode_png(img)); }

void write_jpeg(const std::filesystem::path& path, const RawImage& img, int quality) {
    std::vector<std::uint8_t> out;
    const std::vector<int> params = {cv::IMWRITE_JPEG_QUALITY, quality};
    if (!cv::imencode(".jpg", to_bgr_mat(img), out, params)) throw ImageError("jpeg encoding failed");
    write_file_atomic(path, out);
}

}  // namespace spamlens
