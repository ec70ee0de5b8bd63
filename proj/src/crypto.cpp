#include "senderkeys/crypto.hpp"

#include <openssl/bn.h>
#include <openssl/core_names.h>
#include <openssl/ec.h>
#include <openssl/evp.h>
#include <openssl/param_build.h>

#include <cstring>
#include <stdexcept>

namespace senderkeys::crypto {

namespace {

[[noreturn]] void crypto_abort(const char* what)
{
  throw std::runtime_error(std::string("crypto backend failure: ") + what);
}

struct EvpMdCtx {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  ~EvpMdCtx() { EVP_MD_CTX_free(ctx); }
};

struct EvpCipherCtx {
  EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
  ~EvpCipherCtx() { EVP_CIPHER_CTX_free(ctx); }
};

struct EvpPkey {
  EVP_PKEY* key = nullptr;
  ~EvpPkey() { EVP_PKEY_free(key); }
};

constexpr const char* kCurveName = "prime256v1";

// Order of the P-256 group, big-endian.
const std::uint8_t kGroupOrder[32] = {
  0xff, 0xff, 0xff, 0xff, 0x00, 0x00, 0x00, 0x00, 0xff, 0xff, 0xff,
  0xff, 0xff, 0xff, 0xff, 0xff, 0xbc, 0xe6, 0xfa, 0xad, 0xa7, 0x17,
  0x9e, 0x84, 0xf3, 0xb9, 0xca, 0xc2, 0xfc, 0x63, 0x25, 0x51,
};

// scalar = (seed mod (n-1)) + 1, big-endian into 32 bytes.
SigSecretKey scalar_from_seed(const Seed32& seed)
{
  BIGNUM* n = BN_bin2bn(kGroupOrder, sizeof(kGroupOrder), nullptr);
  BIGNUM* n1 = BN_dup(n);
  BIGNUM* s = BN_bin2bn(seed.data(), static_cast<int>(seed.size()), nullptr);
  BN_CTX* bn_ctx = BN_CTX_new();
  if (n == nullptr || n1 == nullptr || s == nullptr || bn_ctx == nullptr) {
    crypto_abort("BN alloc");
  }
  BN_sub_word(n1, 1);
  BN_mod(s, s, n1, bn_ctx);
  BN_add_word(s, 1);

  SigSecretKey out{};
  if (BN_bn2binpad(s, out.data(), static_cast<int>(out.size())) < 0) {
    crypto_abort("BN_bn2binpad");
  }
  BN_CTX_free(bn_ctx);
  BN_free(s);
  BN_free(n1);
  BN_free(n);
  return out;
}

SigPublicKey public_from_scalar(const SigSecretKey& scalar)
{
  EC_GROUP* group = EC_GROUP_new_by_curve_name(NID_X9_62_prime256v1);
  EC_POINT* point = group != nullptr ? EC_POINT_new(group) : nullptr;
  BIGNUM* priv =
    BN_bin2bn(scalar.data(), static_cast<int>(scalar.size()), nullptr);
  BN_CTX* bn_ctx = BN_CTX_new();
  if (group == nullptr || point == nullptr || priv == nullptr ||
      bn_ctx == nullptr) {
    crypto_abort("EC alloc");
  }
  if (EC_POINT_mul(group, point, priv, nullptr, nullptr, bn_ctx) != 1) {
    crypto_abort("EC_POINT_mul");
  }
  SigPublicKey out{};
  if (EC_POINT_point2oct(group,
                         point,
                         POINT_CONVERSION_COMPRESSED,
                         out.data(),
                         out.size(),
                         bn_ctx) != out.size()) {
    crypto_abort("EC_POINT_point2oct");
  }
  BN_CTX_free(bn_ctx);
  BN_free(priv);
  EC_POINT_free(point);
  EC_GROUP_free(group);
  return out;
}

// Assembles an EVP_PKEY from raw parts; priv may be null for verify-only keys.
EVP_PKEY* make_ec_key(const SigPublicKey* pub, const SigSecretKey* priv)
{
  OSSL_PARAM_BLD* bld = OSSL_PARAM_BLD_new();
  if (bld == nullptr) {
    return nullptr;
  }
  OSSL_PARAM_BLD_push_utf8_string(
    bld, OSSL_PKEY_PARAM_GROUP_NAME, kCurveName, 0);
  BIGNUM* priv_bn = nullptr;
  if (priv != nullptr) {
    priv_bn = BN_bin2bn(priv->data(), static_cast<int>(priv->size()), nullptr);
    OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_PRIV_KEY, priv_bn);
  }
  if (pub != nullptr) {
    OSSL_PARAM_BLD_push_octet_string(
      bld, OSSL_PKEY_PARAM_PUB_KEY, pub->data(), pub->size());
  }
  OSSL_PARAM* params = OSSL_PARAM_BLD_to_param(bld);

  EVP_PKEY* pkey = nullptr;
  EVP_PKEY_CTX* ctx = EVP_PKEY_CTX_new_from_name(nullptr, "EC", nullptr);
  if (params != nullptr && ctx != nullptr &&
      EVP_PKEY_fromdata_init(ctx) == 1) {
    int selection =
      priv != nullptr ? EVP_PKEY_KEYPAIR : EVP_PKEY_PUBLIC_KEY;
    if (EVP_PKEY_fromdata(ctx, &pkey, selection, params) != 1) {
      pkey = nullptr;
    }
  }
  EVP_PKEY_CTX_free(ctx);
  OSSL_PARAM_free(params);
  OSSL_PARAM_BLD_free(bld);
  BN_free(priv_bn);
  return pkey;
}

} // namespace

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data)
{
  std::array<std::uint8_t, 32> out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(),
                 nullptr) != 1 ||
      len != out.size()) {
    crypto_abort("EVP_Digest");
  }
  return out;
}

std::array<std::uint8_t, 32> hmac_sha256(std::span<const std::uint8_t> key,
                                         std::span<const std::uint8_t> data)
{
  std::array<std::uint8_t, 32> out{};
  std::size_t len = 0;
  if (EVP_Q_mac(nullptr,
                "HMAC",
                nullptr,
                "SHA256",
                nullptr,
                key.data(),
                key.size(),
                data.data(),
                data.size(),
                out.data(),
                out.size(),
                &len) == nullptr ||
      len != out.size()) {
    crypto_abort("EVP_Q_mac");
  }
  return out;
}

MessageKey kdf_mk(const ChainKey& ck)
{
  static constexpr std::uint8_t label = 0x01;
  MessageKey mk;
  mk.secret = hmac_sha256(ck.secret, {&label, 1});
  mk.index = ck.index;
  return mk;
}

ChainKey kdf_ck(const ChainKey& ck)
{
  static constexpr std::uint8_t label = 0x02;
  ChainKey next;
  next.secret = hmac_sha256(ck.secret, {&label, 1});
  next.index = ck.index + 1;
  return next;
}

ExpandedKey expand_mk(const MessageKey& mk)
{
  // HKDF-Expand with PRK = mk: T(1) = HMAC(PRK, info || 0x01), truncated.
  static constexpr std::uint8_t enc_info[] = {'e', 'n', 'c', 0x01};
  static constexpr std::uint8_t iv_info[] = {'i', 'v', 0x01};
  ExpandedKey out;
  out.enc_key = hmac_sha256(mk.secret, enc_info);
  auto iv_block = hmac_sha256(mk.secret, iv_info);
  std::memcpy(out.iv.data(), iv_block.data(), out.iv.size());
  return out;
}

bytes enc(const MessageKey& mk, std::span<const std::uint8_t> plaintext)
{
  auto keys = expand_mk(mk);
  EvpCipherCtx c;
  if (c.ctx == nullptr ||
      EVP_EncryptInit_ex(c.ctx, EVP_aes_256_cbc(), nullptr,
                         keys.enc_key.data(), keys.iv.data()) != 1) {
    crypto_abort("EVP_EncryptInit_ex");
  }
  bytes out(plaintext.size() + 16);
  int n1 = 0;
  int n2 = 0;
  if (EVP_EncryptUpdate(c.ctx, out.data(), &n1, plaintext.data(),
                        static_cast<int>(plaintext.size())) != 1 ||
      EVP_EncryptFinal_ex(c.ctx, out.data() + n1, &n2) != 1) {
    crypto_abort("EVP_Encrypt");
  }
  out.resize(static_cast<std::size_t>(n1) + static_cast<std::size_t>(n2));
  return out;
}

Result<bytes> dec(const MessageKey& mk, std::span<const std::uint8_t> ciphertext)
{
  if (ciphertext.empty() || ciphertext.size() % 16 != 0) {
    return Error::decryption_failure;
  }
  auto keys = expand_mk(mk);
  EvpCipherCtx c;
  if (c.ctx == nullptr ||
      EVP_DecryptInit_ex(c.ctx, EVP_aes_256_cbc(), nullptr,
                         keys.enc_key.data(), keys.iv.data()) != 1) {
    crypto_abort("EVP_DecryptInit_ex");
  }
  bytes out(ciphertext.size() + 16);
  int n1 = 0;
  int n2 = 0;
  if (EVP_DecryptUpdate(c.ctx, out.data(), &n1, ciphertext.data(),
                        static_cast<int>(ciphertext.size())) != 1) {
    return Error::decryption_failure;
  }
  if (EVP_DecryptFinal_ex(c.ctx, out.data() + n1, &n2) != 1) {
    // invalid PKCS#7 padding
    return Error::decryption_failure;
  }
  out.resize(static_cast<std::size_t>(n1) + static_cast<std::size_t>(n2));
  return out;
}

SigKeyPair sig_gen(const Seed32& rand)
{
  SigKeyPair kp;
  kp.secret_key = scalar_from_seed(rand);
  kp.public_key = public_from_scalar(kp.secret_key);
  return kp;
}

bytes sign(const SigSecretKey& ssk, std::span<const std::uint8_t> msg)
{
  auto pub = public_from_scalar(ssk);
  EvpPkey pkey{make_ec_key(&pub, &ssk)};
  EvpMdCtx md;
  if (pkey.key == nullptr || md.ctx == nullptr ||
      EVP_DigestSignInit(md.ctx, nullptr, EVP_sha256(), nullptr, pkey.key) !=
        1) {
    crypto_abort("EVP_DigestSignInit");
  }
  std::size_t sig_len = 0;
  if (EVP_DigestSign(md.ctx, nullptr, &sig_len, msg.data(), msg.size()) != 1) {
    crypto_abort("EVP_DigestSign size");
  }
  bytes sig(sig_len);
  if (EVP_DigestSign(md.ctx, sig.data(), &sig_len, msg.data(), msg.size()) !=
      1) {
    crypto_abort("EVP_DigestSign");
  }
  sig.resize(sig_len);
  return sig;
}

bool verify(const SigPublicKey& spk,
            std::span<const std::uint8_t> sig,
            std::span<const std::uint8_t> msg)
{
  EvpPkey pkey{make_ec_key(&spk, nullptr)};
  if (pkey.key == nullptr) {
    return false;
  }
  EvpMdCtx md;
  if (md.ctx == nullptr ||
      EVP_DigestVerifyInit(md.ctx, nullptr, EVP_sha256(), nullptr, pkey.key) !=
        1) {
    return false;
  }
  return EVP_DigestVerify(md.ctx, sig.data(), sig.size(), msg.data(),
                          msg.size()) == 1;
}

void SeededRng::fill(std::span<std::uint8_t> out)
{
  for (auto& b : out) {
    b = static_cast<std::uint8_t>(gen_() & 0xff);
  }
}

PinnedRng::PinnedRng(bytes fixed) : fixed_(std::move(fixed))
{
  if (fixed_.empty()) {
    fixed_.push_back(0);
  }
}

void PinnedRng::fill(std::span<std::uint8_t> out)
{
  for (std::size_t i = 0; i < out.size(); i++) {
    out[i] = fixed_[i % fixed_.size()];
  }
}

} // namespace senderkeys::crypto
