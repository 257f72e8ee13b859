"""icn: an agent-based industrial control network at desk scale.

Layers: simulated word-addressed PLCs (:mod:`icn.plcsim`), cooperating
control agents on top of them (:mod:`icn.control`), a directory facilitator
and message runtime (:mod:`icn.runtime`, :mod:`icn.transport`), and an
operator gateway exposing HTTP/WebSocket supervision (:mod:`icn.gateway`).
Scenarios wire it together (:mod:`icn.scenario`, :mod:`icn.runner`).
"""

__version__ = "0.1.0"
