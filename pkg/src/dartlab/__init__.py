"""dartlab: a forwarding-plane laboratory for content-centric networks.

Two interest/data forwarding schemes over the same simulated substrate:

* DART routers keep per-route forwarding state (destination-and-return
  tokens) plus a small response-correlation table at the edge, and refuse
  interests that cannot make strict forward progress.
* NDN routers keep a pending-interest table entry per distinct in-flight
  name, the classic stateful-forwarding baseline.

The rest of the package is scaffolding to compare them honestly: a
deterministic discrete-event engine, an omniscient shortest-path control
plane, scripted micro-scenarios, and a desk-scale experiment harness.
"""

__version__ = "0.1.0"
