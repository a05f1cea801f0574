"""Secure lighting control over a simulated named-data network.

The library has three layers:

* core:      names, the TLV packet codec, signature schemes
             (:mod:`lumen.names`, :mod:`lumen.packets`, :mod:`lumen.crypto`)
* protocol:  namespace trust and ownership proofs, the authenticated
             command protocol, ack authentication
             (:mod:`lumen.trust`, :mod:`lumen.control`, :mod:`lumen.ackauth`)
* harness:   deterministic network simulation, scenario runner, attack
             suite, benchmarks, live gateway
             (:mod:`lumen.netsim`, :mod:`lumen.entities`, :mod:`lumen.scenario`,
             :mod:`lumen.attacks`, :mod:`lumen.bench`, :mod:`lumen.gateway`)
"""

from .names import Name, name_is_prefix, name_parse
from .packets import ContentObject, Interest, decode_packet, encode_packet

__all__ = [
    "Name",
    "name_parse",
    "name_is_prefix",
    "Interest",
    "ContentObject",
    "encode_packet",
    "decode_packet",
]

__version__ = "0.1.0"
