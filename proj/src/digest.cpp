#include "judgekit/digest.hpp"

#include <array>
#include <cstdint>

#include <openssl/evp.h>

#include "judgekit/errors.hpp"

namespace judgekit {

namespace {

std::string to_hex(const unsigned char* bytes, size_t n) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(n * 2);
    for (size_t i = 0; i < n; ++i) {
        out.push_back(digits[bytes[i] >> 4]);
        out.push_back(digits[bytes[i] & 0xf]);
    }
    return out;
}

struct Sha256 {
    EVP_MD_CTX* ctx;
    Sha256() : ctx(EVP_MD_CTX_new()) {
        if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1)
            throw Error("sha256 init failed");
    }
    ~Sha256() { EVP_MD_CTX_free(ctx); }
    void update(std::string_view data) {
        if (EVP_DigestUpdate(ctx, data.data(), data.size()) != 1)
            throw Error("sha256 update failed");
    }
    std::string hex() {
        std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx, md.data(), &len) != 1)
            throw Error("sha256 final failed");
        return to_hex(md.data(), len);
    }
};

} // namespace

std::string sha256_hex(std::string_view data) {
    Sha256 h;
    h.update(data);
    return h.hex();
}

std::string sha256_fields(const std::vector<std::string_view>& fields) {
    Sha256 h;
    for (const auto& f : fields) {
        uint64_t n = f.size();
        char len[8];
        for (int i = 0; i < 8; ++i) len[i] = char((n >> (8 * i)) & 0xff);
        h.update(std::string_view(len, 8));
        h.update(f);
    }
    return h.hex();
}

} // namespace judgekit
