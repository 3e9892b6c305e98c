"""Pre-distributed key material and simulation-grade signatures.

A signature is an HMAC-SHA256 tag under the signer's per-node key. Every node
can verify every other node's signatures (trusted pre-distribution), but a
node can only *produce* tags under its own key.
"""

from __future__ import annotations

import hashlib
import hmac

from ..engine import NodeId

SIG_LEN = 16
MAC_LEN = 8


class MissingPairwiseKey(KeyError):
    pass


class KeyStore:
    """Deterministic key derivation from a per-run master secret.

    Args:
        seed: scenario seed; the master secret is derived from it.
        node_count: ids ``0 .. node_count - 1`` hold keys; anything else raises
            :class:`MissingPairwiseKey`.
    """

    def __init__(self, seed: int, node_count: int):
        self.node_count = node_count
        self._master = hashlib.sha256(b"manetsec-keystore:" + str(seed).encode()).digest()
        self._auth: dict[NodeId, bytes] = {}
        self._pair: dict[tuple[NodeId, NodeId], bytes] = {}
        self._link: dict[tuple[NodeId, NodeId], bytes] = {}

    def _check(self, *nodes: NodeId) -> None:
        for n in nodes:
            if not 0 <= n < self.node_count:
                raise MissingPairwiseKey(n)

    def _derive(self, label: bytes) -> bytes:
        return hmac.new(self._master, label, hashlib.sha256).digest()

    def node_auth(self, node: NodeId) -> bytes:
        key = self._auth.get(node)
        if key is None:
            self._check(node)
            key = self._auth[node] = self._derive(b"auth:%d" % node)
        return key

    def pairwise(self, a: NodeId, b: NodeId) -> bytes:
        """Symmetric source-destination key; ``pairwise(a, b) == pairwise(b, a)``."""
        lo, hi = (a, b) if a <= b else (b, a)
        key = self._pair.get((lo, hi))
        if key is None:
            self._check(a, b)
            key = self._pair[(lo, hi)] = self._derive(b"pair:%d:%d" % (lo, hi))
        return key

    def link_key(self, sender: NodeId, receiver: NodeId) -> bytes:
        """16-byte block-cipher key for frames sent from ``sender`` to ``receiver``."""
        key = self._link.get((sender, receiver))
        if key is None:
            self._check(sender, receiver)
            key = self._link[(sender, receiver)] = self._derive(
                b"link:%d>%d" % (sender, receiver))[:16]
        return key


def sign(key: bytes, message: bytes) -> bytes:
    return hmac.new(key, message, hashlib.sha256).digest()[:SIG_LEN]


def verify(key: bytes, message: bytes, signature: bytes) -> bool:
    return hmac.compare_digest(sign(key, message), signature)


def mac(key: bytes, message: bytes) -> bytes:
    return hmac.new(key, b"mac:" + message, hashlib.sha256).digest()[:MAC_LEN]
