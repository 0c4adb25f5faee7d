"""Engine version, recorded in run manifests."""

ENGINE_VERSION = "0.1.0"
