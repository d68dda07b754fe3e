#include "spamlens/gif.hpp"

#include <array>
#include <vector>

namespace spamlens {

namespace {

struct Reader {
    const std::uint8_t* p;
    std::size_t n;
    std::size_t pos = 0;

    std::uint8_t u8(const char* what) {
        if (pos >= n) throw ImageError(std::string("gif: truncated in ") + what);
        return p[pos++];
    }
    std::uint16_t u16(const char* what) {
        const std::uint16_t lo = u8(what), hi = u8(what);
        return static_cast<std::uint16_t>(lo | (hi << 8));
    }
    const std::uint8_t* take(std::size_t k, const char* what) {
        if (pos + k > n) throw ImageError(std::string("gif: truncated in ") + what);
        const std::uint8_t* q = p + pos;
        pos += k;
        return q;
    }
};

struct Palette {
    std::array<std::uint8_t, 256 * 3> rgb{};
    int size = 0;
};

Palette read_palette(Reader& r, int size) {
    Palette pal;
    pal.size = size;
    const std::uint8_t* q = r.take(static_cast<std::size_t>(size) * 3, "color table");
    std::copy(q, q + size * 3, pal.rgb.begin());
    return pal;
}

constexpr int kMaxCodes = 4096;

/// LZW with variable code width (LSB-first bit packing), emitting exactly
/// `n_pixels` palette indices.
std::vector<std::uint8_t> lzw_decode(const std::vector<std::uint8_t>& buf, std::size_t n_pixels,
                                     int min_code_size) {
    if (min_code_size < 2 || min_code_size > 11) throw ImageError("gif: invalid LZW minimum code size");
    const int clear_code = 1 << min_code_size;
    const int end_code = clear_code + 1;

    std::vector<std::int16_t> prefix(kMaxCodes, -1);
    std::vector<std::uint8_t> suffix(kMaxCodes, 0);
    std::vector<std::uint8_t> stack;
    stack.reserve(kMaxCodes);

    std::vector<std::uint8_t> out;
    out.reserve(n_pixels);

    int code_size = min_code_size + 1;
    int next_code = end_code + 1;
    int prev_code = -1;

    std::uint32_t acc = 0;
    int acc_bits = 0;
    std::size_t bi = 0;

    auto emit_chain = [&](int code) {
        // walk the chain to its root, then flush in forward order
        stack.clear();
        while (code > end_code) {
            if (code >= next_code) throw ImageError("gif: corrupt LZW chain");
            stack.push_back(suffix[static_cast<std::size_t>(code)]);
            code = prefix[static_cast<std::size_t>(code)];
        }
        if (code >= clear_code) throw ImageError("gif: corrupt LZW root");
        stack.push_back(static_cast<std::uint8_t>(code));
        for (std::size_t i = stack.size(); i-- > 0;) out.push_back(stack[i]);
        return static_cast<std::uint8_t>(code);  // first character of the chain
    };

    while (out.size() < n_pixels) {
        while (acc_bits < code_size) {
            if (bi >= buf.size()) throw ImageError("gif: LZW data exhausted before frame completed");
            acc |= static_cast<std::uint32_t>(buf[bi++]) << acc_bits;
            acc_bits += 8;
        }
        const int code = static_cast<int>(acc & ((1u << code_size) - 1));
        acc >>= code_size;
        acc_bits -= code_size;

        if (code == clear_code) {
            code_size = min_code_size + 1;
            next_code = end_code + 1;
            prev_code = -1;
            continue;
        }
        if (code == end_code) break;

        if (prev_code < 0) {
            if (code >= clear_code) throw ImageError("gif: first code is not a root");
            out.push_back(static_cast<std::uint8_t>(code));
            prev_code = code;
            continue;
        }

        std::uint8_t first_char;
        if (code < next_code) {
            first_char = emit_chain(code);
        } else if (code == next_code) {
            // KwKwK: the chain being defined right now
            stack.clear();
            int walk = prev_code;
            while (walk > end_code) {
                stack.push_back(suffix[static_cast<std::size_t>(walk)]);
                walk = prefix[static_cast<std::size_t>(walk)];
            }
            if (walk >= clear_code) throw ImageError("gif: corrupt LZW root");
            first_char = static_cast<std::uint8_t>(walk);
            stack.push_back(first_char);
            for (std::size_t i = stack.size(); i-- > 0;) out.push_back(stack[i]);
            out.push_back(first_char);
        } else {
            throw ImageError("gif: LZW code beyond dictionary");
        }

        if (next_code < kMaxCodes) {
            prefix[static_cast<std::size_t>(next_code)] = static_cast<std::int16_t>(prev_code);
            suffix[static_cast<std::size_t>(next_code)] = first_char;
            ++next_code;
            if (next_code == (1 << code_size) && code_size < 12) ++code_size;
        }
        prev_code = code;
    }
    if (out.size() < n_pixels) throw ImageError("gif: frame ended short of its pixel count");
    out.resize(n_pixels);
    return out;
}

}  // namespace

RawImage decode_gif_first_frame(const std::uint8_t* data, std::size_t len) {
    if (!looks_like_gif(data, len)) throw ImageError("gif: bad signature");
    Reader r{data, len, 6};

    const int screen_w = r.u16("screen descriptor");
    const int screen_h = r.u16("screen descriptor");
    const std::uint8_t packed = r.u8("screen descriptor");
    const std::uint8_t bg_index = r.u8("screen descriptor");
    r.u8("screen descriptor");  // pixel aspect ratio, unused

    Palette global;
    if (packed & 0x80) global = read_palette(r, 2 << (packed & 0x07));
    if (screen_w <= 0 || screen_h <= 0) throw ImageError("gif: zero-area logical screen");

    for (;;) {
        const std::uint8_t block = r.u8("block type");
        if (block == 0x3B) throw ImageError("gif: no image data before trailer");
        if (block == 0x21) {
            r.u8("extension label");
            for (;;) {
                const std::uint8_t sz = r.u8("extension block");
                if (sz == 0) break;
                r.take(sz, "extension block");
            }
            continue;
        }
        if (block != 0x2C) throw ImageError("gif: unknown block type");

        const int left = r.u16("image descriptor");
        const int top = r.u16("image descriptor");
        const int w = r.u16("image descriptor");
        const int h = r.u16("image descriptor");
        const std::uint8_t ipacked = r.u8("image descriptor");
        if (w <= 0 || h <= 0) throw ImageError("gif: zero-area frame");
        if (left + w > screen_w || top + h > screen_h)
            throw ImageError("gif: frame exceeds the logical screen");

        Palette local;
        if (ipacked & 0x80) local = read_palette(r, 2 << (ipacked & 0x07));
        const Palette& pal = local.size ? local : global;
        if (pal.size == 0) throw ImageError("gif: no color table");
        const bool interlaced = (ipacked & 0x40) != 0;

        const int min_code_size = r.u8("LZW code size");
        std::vector<std::uint8_t> lzw;
        for (;;) {
            const std::uint8_t sz = r.u8("image data");
            if (sz == 0) break;
            const std::uint8_t* q = r.take(sz, "image data");
            lzw.insert(lzw.end(), q, q + sz);
        }

        const std::vector<std::uint8_t> indices =
            lzw_decode(lzw, static_cast<std::size_t>(w) * h, min_code_size);

        RawImage img;
        img.height = screen_h;
        img.width = screen_w;
        img.channels = 3;
        img.pixels.assign(static_cast<std::size_t>(screen_h) * screen_w * 3, 0);
        if (global.size > 0 && bg_index < global.size) {
            for (std::size_t k = 0; k < static_cast<std::size_t>(screen_h) * screen_w; ++k) {
                img.pixels[k * 3 + 0] = global.rgb[bg_index * 3 + 0];
                img.pixels[k * 3 + 1] = global.rgb[bg_index * 3 + 1];
                img.pixels[k * 3 + 2] = global.rgb[bg_index * 3 + 2];
            }
        }

        // interlaced frames store rows in four passes
        std::vector<int> row_order(static_cast<std::size_t>(h));
        if (interlaced) {
            int rr = 0;
            for (int y = 0; y < h; y += 8) row_order[static_cast<std::size_t>(rr++)] = y;
            for (int y = 4; y < h; y += 8) row_order[static_cast<std::size_t>(rr++)] = y;
            for (int y = 2; y < h; y += 4) row_order[static_cast<std::size_t>(rr++)] = y;
            for (int y = 1; y < h; y += 2) row_order[static_cast<std::size_t>(rr++)] = y;
        } else {
            for (int y = 0; y < h; ++y) row_order[static_cast<std::size_t>(y)] = y;
        }

        for (int src_row = 0; src_row < h; ++src_row) {
            const int y = row_order[static_cast<std::size_t>(src_row)];
            for (int x = 0; x < w; ++x) {
                const std::uint8_t idx = indices[static_cast<std::size_t>(src_row) * w + x];
                if (idx >= pal.size) throw ImageError("gif: pixel index outside the color table");
                const std::size_t dst = (static_cast<std::size_t>(top + y) * screen_w + (left + x)) * 3;
                img.pixels[dst + 0] = pal.rgb[idx * 3 + 0];
                img.pixels[dst + 1] = pal.rgb[idx * 3 + 1];
                img.pixels[dst + 2] = pal.rgb[idx * 3 + 2];
            }
        }
        return img;
    }
}

}  // namespace spamlens
