from .mnist import Dataset, ingest_mnist, load_split
from .training import NetworkTopology, TrainingHyperparams, float_predict, train_offline, save_weights, load_weights
from .crossbar import (
    CrossbarParams, ConductanceLayer, ConductanceNetwork,
    quantize_weights, synaptic_current, column_currents, nodal_column_current, rcn_static_power,
    save_conductances, load_conductances,
)
from .inference import InferenceMode, NeuronContext, AccuracyReport, layer_forward, network_infer, evaluate, write_report
