#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include <openssl/evp.h>

#include "twinspect/bytes.hpp"

namespace twinspect {

inline std::string to_hex(std::span<const uint8_t> bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (uint8_t b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0F]);
    }
    return out;
}

// Streaming message digest over OpenSSL's EVP interface.
class StreamDigest {
public:
    enum class Algo { sha256, md5 };

    explicit StreamDigest(Algo algo) : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_)
            throw std::runtime_error("EVP_MD_CTX_new failed");
        const EVP_MD* md = algo == Algo::sha256 ? EVP_sha256() : EVP_md5();
        if (EVP_DigestInit_ex(ctx_, md, nullptr) != 1) {
            EVP_MD_CTX_free(ctx_);
            throw std::runtime_error("EVP_DigestInit_ex failed");
        }
    }

    StreamDigest(const StreamDigest&) = delete;
    StreamDigest& operator=(const StreamDigest&) = delete;

    ~StreamDigest() { EVP_MD_CTX_free(ctx_); }

    void update(std::span<const uint8_t> data) {
        if (EVP_DigestUpdate(ctx_, data.data(), data.size()) != 1)
            throw std::runtime_error("EVP_DigestUpdate failed");
    }

    void update(std::string_view data) {
        update(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(data.data()),
                                        data.size()));
    }

    std::string finish_hex() {
        std::array<uint8_t, EVP_MAX_MD_SIZE> out{};
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_, out.data(), &len) != 1)
            throw std::runtime_error("EVP_DigestFinal_ex failed");
        return to_hex(std::span<const uint8_t>(out.data(), len));
    }

private:
    EVP_MD_CTX* ctx_;
};

inline std::string sha256_hex(std::span<const uint8_t> data) {
    StreamDigest d(StreamDigest::Algo::sha256);
    d.update(data);
    return d.finish_hex();
}

inline std::string sha256_hex(std::string_view data) {
    StreamDigest d(StreamDigest::Algo::sha256);
    d.update(data);
    return d.finish_hex();
}

inline std::string sha256_hex(const ByteSource& src, uint64_t offset, uint64_t length) {
    StreamDigest d(StreamDigest::Algo::sha256);
    for_each_chunk(src, offset, length, [&](std::span<const uint8_t> chunk) { d.update(chunk); });
    return d.finish_hex();
}

inline std::string md5_hex(std::string_view data) {
    StreamDigest d(StreamDigest::Algo::md5);
    d.update(data);
    return d.finish_hex();
}

} // namespace twinspect
