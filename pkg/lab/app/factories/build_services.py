from config.settings import Settings
from lab.services.adsc_service import AdscService
from lab.services.discretization_service import DiscretizationService
from lab.services.reference_service import ReferenceService
from lab.services.benchmark_service import BenchmarkService
from lab.services.export_service import ExportService
from lab.services.property_check_service import PropertyCheckService


def build_core_services(settings: Settings):
    adsc_service = AdscService(settings)
    discretization_service = DiscretizationService(settings, adsc_service)
    reference_service = ReferenceService(settings)
    benchmark_service = BenchmarkService(settings, discretization_service, adsc_service,
                                         reference_service)
    export_service = ExportService(settings)
    property_check_service = PropertyCheckService(settings, adsc_service)

    return {
        "adsc_service": adsc_service,
        "discretization_service": discretization_service,
        "reference_service": reference_service,
        "benchmark_service": benchmark_service,
        "export_service": export_service,
        "property_check_service": property_check_service,
    }
