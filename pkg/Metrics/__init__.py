from Metrics.accuracy import per_class_accuracy
from Metrics.features import ClassifierFeatures, GaussianPosteriorExtractor, IdentityFeatures
from Metrics.fid import GaussianStats, fid, fid_between, fit_stats
from Metrics.inception import inception_score
from Metrics.interfaces import FeatureExtractor, LabelPredictor
from Metrics.pareto import pareto_frontier, pareto_indices
from Metrics.records import MetricRecord
