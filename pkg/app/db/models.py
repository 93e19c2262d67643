"""
SQLAlchemy database models for the FedSSC run history.
"""

from datetime import datetime

from sqlalchemy import Column, DateTime, Float, ForeignKey, Integer, String, Text
from sqlalchemy.orm import declarative_base, relationship

Base = declarative_base()


class ExperimentRun(Base):
    """One experiment (run, sweep member or centralized reference)."""
    __tablename__ = 'experiment_run'

    id = Column(Integer, primary_key=True)
    run_id = Column(String(50), unique=True, index=True, nullable=False)
    preset = Column(String(20), nullable=False)
    dataset = Column(String(20), nullable=False)
    seed = Column(Integer, nullable=False)
    status = Column(String(20), default='running')  # running, completed, failed
    started_at = Column(DateTime, default=datetime.utcnow)
    completed_at = Column(DateTime, nullable=True)
    rounds = Column(Integer, default=0)
    best_accuracy = Column(Float, nullable=True)
    final_accuracy = Column(Float, nullable=True)
    rounds_to_target = Column(Integer, nullable=True)  # NULL means not reached
    config_text = Column(Text, nullable=False)
    error_message = Column(Text, nullable=True)

    reports = relationship("RoundRecord", back_populates="run", order_by="RoundRecord.round")


class RoundRecord(Base):
    """One RoundReport of a run."""
    __tablename__ = 'round_record'

    id = Column(Integer, primary_key=True)
    run_pk = Column(Integer, ForeignKey('experiment_run.id'), index=True, nullable=False)
    round = Column(Integer, nullable=False)
    acc = Column(Float, nullable=False)
    l_class = Column(Float, nullable=True)
    l_moon = Column(Float, nullable=True)
    l_glob = Column(Float, nullable=True)
    mu_glob = Column(Float, nullable=False)
    classes_in_bank = Column(Integer, default=0)
    wall_ms = Column(Float, nullable=True)

    run = relationship("ExperimentRun", back_populates="reports")
