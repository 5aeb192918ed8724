"""Data pipeline: readings -> hourly series -> feature windows -> datasets."""

from .cleaning import HourlySeries, RawReading, clean_readings
from .features import (
    BASE_COLUMNS,
    WEATHER_COLUMNS,
    DesignMatrix,
    FeatureVector,
    WeatherRecord,
    WeatherTable,
    build_design_matrix,
    calendar_fields,
)
from .normalize import NormalizationParams, denormalize_column, fit_normalizer, normalize
from .sequences import (
    HouseholdDataset,
    SequenceSample,
    SequenceSet,
    build_household_dataset,
    make_sequences,
    split_chronological,
)
from .synthetic import (
    ARCHETYPES,
    SyntheticHousehold,
    SyntheticPopulation,
    generate_synthetic_households,
)
from .ingest import (
    ingest_meter_csv,
    ingest_weather_csv,
    write_meter_csv,
    write_weather_csv,
)
from .cache import (
    PreparedData,
    PreparedHousehold,
    dataset_digest,
    household_datasets,
    load_cache,
    prepare_datasets,
    write_cache,
)

__all__ = [
    "ARCHETYPES",
    "BASE_COLUMNS",
    "DesignMatrix",
    "FeatureVector",
    "HourlySeries",
    "HouseholdDataset",
    "NormalizationParams",
    "PreparedData",
    "PreparedHousehold",
    "RawReading",
    "SequenceSample",
    "SequenceSet",
    "SyntheticHousehold",
    "SyntheticPopulation",
    "WEATHER_COLUMNS",
    "WeatherRecord",
    "WeatherTable",
    "build_design_matrix",
    "build_household_dataset",
    "calendar_fields",
    "clean_readings",
    "dataset_digest",
    "denormalize_column",
    "fit_normalizer",
    "generate_synthetic_households",
    "household_datasets",
    "ingest_meter_csv",
    "ingest_weather_csv",
    "load_cache",
    "make_sequences",
    "normalize",
    "prepare_datasets",
    "split_chronological",
    "write_cache",
    "write_meter_csv",
    "write_weather_csv",
]
