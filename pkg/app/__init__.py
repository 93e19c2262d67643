"""
FedSSC Simulator
Deterministic federated-learning simulator for FedAvg, MOON and FedSSC.
"""

__version__ = "0.1.0"
__author__ = "FedSSC Simulator Contributors"
