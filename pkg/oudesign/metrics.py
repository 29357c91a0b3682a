from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, write_to_textfile


class DesignMetrics:
    """Prometheus collectors for information and optimisation workloads."""
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super(DesignMetrics, cls).__new__(cls)
            cls._instance._initialized = False
        return cls._instance

    def __init__(self):
        if not self._initialized:
            self._build()
            self._initialized = True

    def _build(self):
        self.registry = CollectorRegistry()
        self.fim_evaluations = Counter(
            "oudesign_fim_evaluations", "Fisher information evaluations", ["method"], registry=self.registry
        )
        self.exchange_sweeps = Counter(
            "oudesign_exchange_sweeps", "Coordinate-exchange sweeps", registry=self.registry
        )
        self.sweep_seconds = Histogram(
            "oudesign_exchange_sweep_seconds", "Duration of one exchange sweep", registry=self.registry
        )
        self.active_replications = Gauge(
            "oudesign_active_replications", "Monte-Carlo replications in flight", registry=self.registry
        )

    def track_fim(self, method: str):
        self.fim_evaluations.labels(method=method).inc()

    def fim_count(self, method: str) -> float:
        value = self.registry.get_sample_value("oudesign_fim_evaluations_total", {"method": method})
        return value or 0.0

    def reset(self):
        """Replace all collectors with fresh ones on a new registry."""
        self._build()

    def write(self, path: str):
        write_to_textfile(path, self.registry)


metrics = DesignMetrics()
