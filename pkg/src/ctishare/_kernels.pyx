# cython: language_level=3
"""Compiled digest kernels calling OpenSSL's SHA-256 directly.

Same interface as ``_kernels_py``: per-group canonical byte strings in,
(digests, bytes hashed) out. The win over hashlib is per-call overhead,
which dominates the cumulative-prefix scheme at large group counts.
"""

from cpython.bytes cimport PyBytes_AsStringAndSize, PyBytes_FromStringAndSize
from libc.stddef cimport size_t

BACKEND = "c"

cdef extern from "openssl/evp.h":
    ctypedef struct EVP_MD_CTX:
        pass
    ctypedef struct EVP_MD:
        pass
    const EVP_MD *EVP_sha256()
    EVP_MD_CTX *EVP_MD_CTX_new()
    void EVP_MD_CTX_free(EVP_MD_CTX *ctx)
    int EVP_DigestInit_ex(EVP_MD_CTX *ctx, const EVP_MD *md, void *impl)
    int EVP_DigestUpdate(EVP_MD_CTX *ctx, const void *d, size_t cnt)
    int EVP_DigestFinal_ex(EVP_MD_CTX *ctx, unsigned char *out, unsigned int *outlen)

DEF DIGEST_LEN = 32


cdef class _Sha256:
    cdef EVP_MD_CTX *ctx

    def __cinit__(self):
        self.ctx = EVP_MD_CTX_new()
        if self.ctx is NULL:
            raise MemoryError("EVP_MD_CTX_new failed")

    def __dealloc__(self):
        if self.ctx is not NULL:
            EVP_MD_CTX_free(self.ctx)

    cdef int reset(self) except -1:
        if EVP_DigestInit_ex(self.ctx, EVP_sha256(), NULL) != 1:
            raise RuntimeError("EVP_DigestInit_ex failed")
        return 0

    cdef int absorb(self, object data) except -1:
        cdef char *buf
        cdef Py_ssize_t n
        PyBytes_AsStringAndSize(data, &buf, &n)
        if EVP_DigestUpdate(self.ctx, buf, <size_t> n) != 1:
            raise RuntimeError("EVP_DigestUpdate failed")
        return 0

    cdef bytes squeeze(self):
        cdef unsigned char out[DIGEST_LEN]
        cdef unsigned int outlen = 0
        if EVP_DigestFinal_ex(self.ctx, out, &outlen) != 1:
            raise RuntimeError("EVP_DigestFinal_ex failed")
        return PyBytes_FromStringAndSize(<char *> out, outlen)


def single_digests(list nonces, list canonicals):
    """digest_i = SHA-256(nonce_i || canonical_i), one per group."""
    if len(nonces) != len(canonicals):
        raise ValueError("nonce count differs from group count")
    cdef _Sha256 h = _Sha256()
    cdef Py_ssize_t i, n = len(canonicals)
    cdef long long total = 0
    cdef list digests = []
    for i in range(n):
        h.reset()
        h.absorb(nonces[i])
        h.absorb(canonicals[i])
        digests.append(h.squeeze())
        total += len(<bytes> nonces[i]) + len(<bytes> canonicals[i])
    return digests, total


def multi_digests(list nonces, list canonicals):
    """digest_k = SHA-256(nonce_k || canonical_1 || ... || canonical_k) for k=1..N."""
    if len(nonces) != len(canonicals):
        raise ValueError("nonce count differs from group count")
    cdef _Sha256 h = _Sha256()
    cdef Py_ssize_t j, k, n = len(canonicals)
    cdef long long total = 0, fed
    cdef list digests = []
    for k in range(1, n + 1):
        h.reset()
        h.absorb(nonces[k - 1])
        fed = len(<bytes> nonces[k - 1])
        for j in range(k):
            h.absorb(canonicals[j])
            fed += len(<bytes> canonicals[j])
        digests.append(h.squeeze())
        total += fed
    return digests, total


def prefix_digest(bytes nonce, list canonicals):
    """Single cumulative digest over a disclosed prefix (validation path)."""
    cdef _Sha256 h = _Sha256()
    cdef Py_ssize_t i, n = len(canonicals)
    cdef long long fed = len(nonce)
    h.reset()
    h.absorb(nonce)
    for i in range(n):
        h.absorb(canonicals[i])
        fed += len(<bytes> canonicals[i])
    return h.squeeze(), fed
