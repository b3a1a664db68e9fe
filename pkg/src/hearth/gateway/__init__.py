"""Service boundary: HTTP API, event stream, persistence, scenario driver."""
