"""Pseudoinverse-matrix key agreement for healthcare sensor networks.

Submodules: ``gfmatrix`` (GF(q) matrices, generalized inverses), ``handshake``
(node/SBS key exchange), ``crypto`` (KDF, cipher, central key generator),
``netsim`` (framed network and energy simulator), ``analysis`` (eavesdropper
measurements) and ``cli``.
"""

__version__ = "0.1.0"
